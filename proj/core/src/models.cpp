#include "qdy/models.hpp"

#include <algorithm>
#include <cctype>

namespace qdy {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int variant_qubits(std::string_view variant) {
  const std::string v = lower(variant);
  if (v == "2q" || v == "2") return 2;
  if (v == "4q" || v == "4") return 4;
  throw UnknownModel("unknown variant '" + std::string(variant) + "' (expected 2q or 4q)");
}

}  // namespace

ThreatRuleSet threat_preset(std::string_view name) {
  const ThreatRuleSet passive{ThreatRule::IdQ};
  const ThreatRuleSet forge = passive.with(ThreatRule::Measure).with(ThreatRule::Forge);
  const std::string key = lower(name);
  if (key == "passive") return passive;
  if (key == "forge") return forge;
  if (key == "epr") return forge.with(ThreatRule::Epr).with(ThreatRule::EprLeak);
  if (key == "guess") return forge.with(ThreatRule::Guess).with(ThreatRule::Complem);
  if (key == "full") {
    return forge.with(ThreatRule::Epr).with(ThreatRule::EprLeak).with(ThreatRule::Guess).with(ThreatRule::Complem);
  }
  throw UnknownPreset("unknown threat model '" + std::string(name) + "' (expected passive, forge, epr, guess, full)");
}

const std::vector<std::string>& threat_preset_names() {
  static const std::vector<std::string> names{"passive", "forge", "epr", "guess", "full"};
  return names;
}

ThreatRuleSet effective_threat(const ProtocolSpec& spec, const ThreatRuleSet& threat) {
  ThreatRuleSet out = threat;
  for (ThreatRule r : spec.forbidden_rules) out = out.without(r);
  return out;
}

ScenarioConfig qkd_scenario(int qubits) {
  ScenarioConfig sc;
  sc.protocol = "qkd";
  sc.n = qubits;
  if (qubits == 2) {
    sc.bitstrings["b"]["Alice"] = {"0", "1"};
    sc.bitstrings["b"]["Bob"] = {"0", "1"};
    sc.bitstrings["d"]["Alice"] = {"0", "1"};
  } else if (qubits == 4) {
    sc.bitstrings["b"]["Alice"] = {"0", "1", "0", "1"};
    sc.bitstrings["b"]["Bob"] = {"0", "0", "1", "1"};
    sc.bitstrings["d"]["Alice"] = {"0", "1", "1", "0"};
    sc.same_value_groups = {{"1", "4"}, {"2", "3"}};
  } else {
    throw UnknownModel("qkd models exist for 2 and 4 qubits");
  }
  sc.restrictions = scenario_default_restrictions(sc);
  return sc;
}

ScenarioConfig qbc_scenario(int qubits) {
  ScenarioConfig sc;
  sc.protocol = "qbc";
  sc.n = qubits;
  if (qubits == 2) {
    sc.bitstrings["b"]["Bob"] = {"0", "1"};
  } else if (qubits == 4) {
    sc.bitstrings["b"]["Bob"] = {"0", "1", "0", "1"};
  } else {
    throw UnknownModel("qbc models exist for 2 and 4 qubits");
  }
  sc.cross_position = {"b"};
  sc.restrictions = scenario_default_restrictions(sc);
  return sc;
}

ProtocolSpec builtin_qkd(std::string_view variant, const ChannelAssumptions& channels, const std::string& view) {
  return make_qkd_spec(qkd_scenario(variant_qubits(variant)), channels, view);
}

ProtocolSpec builtin_qbc(std::string_view variant) { return make_qbc_spec(qbc_scenario(variant_qubits(variant))); }

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries{
      {"qkd-2q", "qkd", 2, "BB84 key distribution, both bases match; position 1 is the key, position 2 the check bit"},
      {"qkd-4q", "qkd", 4, "BB84 key distribution, bases match at positions 1 and 4"},
      {"qbc-2q", "qbc", 2, "BB84 bit commitment against a dishonest committer, 2 qubits"},
      {"qbc-4q", "qbc", 4, "BB84 bit commitment against a dishonest committer, 4 qubits"},
  };
  return entries;
}

ProtocolSpec builtin(std::string_view name, const ChannelAssumptions& channels, const std::string& view) {
  const std::string key = lower(name);
  for (const CatalogEntry& e : catalog()) {
    if (e.name != key) continue;
    if (e.protocol == "qkd") return builtin_qkd(std::to_string(e.qubits) + "q", channels, view);
    return builtin_qbc(std::to_string(e.qubits) + "q");
  }
  throw UnknownModel("unknown model '" + std::string(name) + "' (see list-models)");
}

}  // namespace qdy
