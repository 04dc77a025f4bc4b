#include "doctest.h"

#include "checks.hpp"
#include "qdy/models.hpp"

using namespace qdy;

namespace {

using TR = ThreatRule;

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("threat presets") {
    CHECK(threat_preset("passive") == ThreatRuleSet{TR::IdQ});
    CHECK(threat_preset("Forge") == ThreatRuleSet{TR::IdQ, TR::Measure, TR::Forge});
    CHECK(threat_preset("EPR") == ThreatRuleSet{TR::IdQ, TR::Measure, TR::Forge, TR::Epr, TR::EprLeak});
    CHECK(threat_preset("guess") == ThreatRuleSet{TR::IdQ, TR::Measure, TR::Forge, TR::Guess, TR::Complem});
    CHECK(threat_preset("full") ==
          ThreatRuleSet{TR::IdQ, TR::Measure, TR::Forge, TR::Epr, TR::EprLeak, TR::Guess, TR::Complem});
    CHECK_THROWS_AS(threat_preset("omniscient"), UnknownPreset);
    CHECK(threat_preset_names().size() == 5);
    for (const std::string& p : threat_preset_names()) CHECK(threat_preset("passive").subset_of(threat_preset(p)));
  }

  TEST_CASE("qbc forbids the complement rule") {
    const ProtocolSpec qbc = builtin_qbc("2q");
    CHECK_FALSE(effective_threat(qbc, threat_preset("full")).has(TR::Complem));
    CHECK(effective_threat(qbc, threat_preset("full")).has(TR::Guess));
    CHECK(effective_threat(builtin_qkd("2q", {}), threat_preset("full")).has(TR::Complem));
  }

  TEST_CASE("four-qubit QKD scenario") {
    const ScenarioConfig sc = qkd_scenario(4);
    CHECK(sc.row("b", "Alice") == std::vector<std::string>{"0", "1", "0", "1"});
    CHECK(sc.row("b", "Bob") == std::vector<std::string>{"0", "0", "1", "1"});
    CHECK(sc.row("d", "Alice") == std::vector<std::string>{"0", "1", "1", "0"});
    for (const auto& [bs, rows] : sc.bitstrings) {
      for (const auto& [role, values] : rows) CHECK(std::count(values.begin(), values.end(), "0") == 2);
    }
    CHECK(sc.restrictions.default_cap == 2u);
    REQUIRE(sc.restrictions.groups.size() == 2);
    CHECK(sc.restrictions.groups[0].positions == std::set<std::string>{"1", "4"});
    CHECK(sc.restrictions.groups[1].positions == std::set<std::string>{"2", "3"});
    CHECK(sc.restrictions.groups[0].cap == 1);
    CHECK(builtin_qkd("4q", {}).threshold == 2);
  }

  TEST_CASE("two-qubit QKD caps") {
    const ProtocolSpec spec = builtin_qkd("2q", {});
    CHECK(spec.scenario.restrictions.cap_for("d", "Alice") == 1u);
    CHECK(spec.scenario.restrictions.cap_for("b", "Bob") == 1u);
    for (const RestrictionGroup& g : spec.scenario.restrictions.groups) CHECK(g.cap == 1);
    CHECK(spec.scenario.row("b", "Alice") == spec.scenario.row("b", "Bob"));
  }

  TEST_CASE("qbc restrictions and interchangeability") {
    const ProtocolSpec spec = builtin_qbc("4q");
    CHECK(spec.cfg.cross_position_bitstrings == std::set<std::string>{"b"});
    CHECK(spec.scenario.restrictions.cap_for("b", "Bob") == 0u);
    CHECK(spec.scenario.restrictions.cap_for("b", "Alice") == 0u);
    CHECK(spec.roles.size() == 1);
    CHECK(spec.threshold == 2);
    CHECK(spec.property.kind == PropertySpec::Kind::Binding);
  }

  TEST_CASE("catalog") {
    std::vector<std::string> names;
    for (const CatalogEntry& e : catalog()) names.push_back(e.name);
    CHECK(names == std::vector<std::string>{"qkd-2q", "qkd-4q", "qbc-2q", "qbc-4q"});
    CHECK_THROWS_AS(builtin("qkd-8q"), UnknownModel);
    CHECK(builtin("qkd-2q", {}, "Alice").property.role == "Alice");
    for (const CatalogEntry& e : catalog()) {
      const ProtocolSpec spec = builtin(e.name);
      CHECK_NOTHROW(spec.validate());
      CHECK_NOTHROW(parse_scenario_json(scenario_to_json(spec)));
    }
  }

  TEST_CASE("honest QKD runs reach both finish states") {
    for (const std::string variant : {"2q", "4q"}) {
      for (const std::string view : {"Alice", "Bob"}) {
        const ProtocolSpec spec = builtin_qkd(variant, {}, view);
        Explorer ex(spec, threat_preset("passive"));
        ExecutionState s = checks::honest_run(ex);
        CAPTURE(variant);
        for (const RoleState& r : s.roles) CHECK(r.status == RoleStatus::Finished);
        std::size_t secrets = 0;
        for (const EventRecord& e : s.events) secrets += e.label == "secret" ? 1 : 0;
        CHECK(secrets == 2);
        bool hit = false;
        CHECK_FALSE(ex.check(s, hit));
      }
    }
  }

  TEST_CASE("honest commit and unveil is accepted") {
    for (const std::string variant : {"2q", "4q"}) {
      const ProtocolSpec spec = builtin_qbc(variant);
      Explorer ex(spec, threat_preset("forge"));
      // Without EPR pairs or guesses the committer can only unveil the base
      // it committed to, and Bob accepts that.
      std::vector<ExecutionState> frontier{ex.initial()};
      std::optional<ExecutionState> accepted;
      for (int depth = 0; depth < 6 && !accepted && !frontier.empty(); ++depth) {
        std::vector<ExecutionState> next;
        for (const ExecutionState& s : frontier) {
          for (ExecutionState& c : ex.successors(s).states) {
            if (!c.events.empty() && !accepted) accepted = c;
            next.push_back(std::move(c));
          }
        }
        frontier = std::move(next);
      }
      CAPTURE(variant);
      REQUIRE(accepted);
      CHECK(accepted->roles[0].status == RoleStatus::Finished);
      CHECK(accepted->events[0].label == "accept");
      CHECK(eq_b(accepted->events[0].args[0][0], bit(spec.seed, "b", "2", "Alice", "1"), spec.cfg));
      bool hit = false;
      CHECK_FALSE(ex.check(*accepted, hit));
    }
  }
}
