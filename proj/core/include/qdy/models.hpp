#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qdy/deduction.hpp"
#include "qdy/protocol.hpp"

namespace qdy {

class UnknownPreset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// passive, forge, epr, guess, full (case-insensitive).
ThreatRuleSet threat_preset(std::string_view name);
const std::vector<std::string>& threat_preset_names();

/// The preset minus whatever the protocol forbids.
ThreatRuleSet effective_threat(const ProtocolSpec& spec, const ThreatRuleSet& threat);

ScenarioConfig qkd_scenario(int qubits);
ScenarioConfig qbc_scenario(int qubits);

/// variant is "2q" or "4q".
ProtocolSpec builtin_qkd(std::string_view variant, const ChannelAssumptions& channels, const std::string& view = "Bob");
ProtocolSpec builtin_qbc(std::string_view variant);

struct CatalogEntry {
  std::string name;
  std::string protocol;
  int qubits = 0;
  std::string description;
};

const std::vector<CatalogEntry>& catalog();

/// Looks up a catalog name such as "qkd-2q". Channel assumptions and the view
/// only apply to QKD models.
ProtocolSpec builtin(std::string_view name, const ChannelAssumptions& channels = {}, const std::string& view = "Bob");

}  // namespace qdy
