#include "doctest.h"

#include <random>

#include "checks.hpp"
#include "qdy/models.hpp"
#include "qdy/protocol.hpp"

using namespace qdy;

namespace {

const Term k = Term::name("k");

const char* kExample4 = R"({
  "protocol": "qkd",
  "n": 4,
  "bitstrings": {
    "b": {"Alice": ["0", "1", "0", "1"], "Bob": ["0", "0", "1", "1"]},
    "d": {"Alice": ["0", "1", "1", "0"]}
  },
  "sameValueGroups": [[1, 4], [2, 3]]
})";

Role compare_role() {
  Role r;
  r.name = "Bob";
  r.program = {act::CompareB{Term::var("y"), Term::var("op")}, act::Finish{}};
  return r;
}

RoleState with_terms(Term y, Term op) {
  RoleState s;
  s.env.terms["y"] = std::move(y);
  s.env.terms["op"] = std::move(op);
  return s;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("interchangeable comparison advances") {
    NameSupply names;
    const Role r = compare_role();
    StepOutcome out = step_role(r, with_terms(bit(k, "d", "1", "Alice", "0"), bit(k, "d", "1", "Bob", "0")), {}, names, {});
    CHECK(out.next.status == RoleStatus::Running);
    CHECK(out.next.pc == 1);
    StepOutcome done = step_role(r, out.next, {}, names, {});
    CHECK(done.next.status == RoleStatus::Finished);
  }

  TEST_CASE("differing verification bit aborts") {
    NameSupply names;
    StepOutcome out =
        step_role(compare_role(), with_terms(bit(k, "d", "1", "Alice", "1"), bit(k, "d", "1", "Bob", "0")), {}, names, {});
    CHECK(out.next.status == RoleStatus::Aborted);
    CHECK(out.next.pc == 0);
  }

  TEST_CASE("receive requires an input") {
    Role r;
    r.name = "Alice";
    r.program = {act::Recv{"done", Term::constant("done"), {}, std::nullopt}};
    NameSupply names;
    CHECK_THROWS_AS(step_role(r, RoleState{}, {}, names, {}), PatternMismatch);
    RoleInput wrong;
    wrong.message = Term::constant("nope");
    CHECK_THROWS_AS(step_role(r, RoleState{}, wrong, names, {}), PatternMismatch);
    RoleInput right;
    right.message = Term::constant("done");
    CHECK(step_role(r, RoleState{}, right, names, {}).next.pc == 1);
  }

  TEST_CASE("role programs are deterministic") {
    const ProtocolSpec spec = builtin("qkd-2q");
    Explorer ex(spec, threat_preset("forge"));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
      std::mt19937_64 a = rng;
      std::mt19937_64 b = rng;
      CHECK(checks::random_walk(ex, a, 10).canonical() == checks::random_walk(ex, b, 10).canonical());
      rng.discard(17);
    }
  }

  TEST_CASE("example scenario document") {
    ScenarioDocument doc = parse_scenario(kExample4);
    CHECK(doc.spec.threshold == 2);
    CHECK(doc.spec.scenario.same_value_groups.size() == 2);
    Explorer ex(doc.spec, threat_preset("passive"));
    ExecutionState s = checks::honest_run(ex);
    const RoleState& bob = s.roles[doc.spec.role_index("Bob")];
    CHECK(bob.status == RoleStatus::Finished);
    CHECK(bob.env.list("J") == std::vector<Term>{Term::constant("1"), Term::constant("4")});
  }

  TEST_CASE("two-qubit scenario with matching bases") {
    ScenarioDocument doc = parse_scenario(R"({"protocol":"qkd","n":2,
      "bitstrings":{"b":{"Alice":["0","1"],"Bob":["0","1"]},"d":{"Alice":["1","0"]}},
      "channels":{"auth":["done"],"order":true},"property":{"kind":"secrecy","view":"alice"},"threatModel":"forge"})");
    CHECK(doc.spec.threshold == 2);
    CHECK(doc.spec.property.role == "Alice");
    CHECK(doc.spec.channels.auth_done);
    CHECK(doc.spec.channels.order);
    CHECK(doc.threat_model == "forge");
  }

  TEST_CASE("invalid scenario documents") {
    CHECK_THROWS_AS(parse_scenario(R"({"protocol":"qkd","n":4,
      "bitstrings":{"b":{"Alice":["0","1","0"],"Bob":["0","0","1","1"]},"d":{"Alice":["0","1","1","0"]}}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_scenario(R"({"protocol":"qkd","n":2,
      "bitstrings":{"b":{"Alice":["0","0"],"Bob":["0","0"]},"d":{"Alice":["0","1"]}}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_scenario(R"({"protocol":"qkd","n":3,"bitstrings":{}})"), ValidationError);
    CHECK_THROWS_AS(parse_scenario(R"({"protocol":"teleport","n":2,"bitstrings":{}})"), ValidationError);
    CHECK_THROWS_AS(parse_scenario(R"({"protocol":"qkd","n":2,
      "bitstrings":{"b":{"Alice":["0","1"],"Bob":["0","1"]},"d":{"Alice":["0","1"]}},
      "channels":{"auth":["everything"]}})"),
                    ValidationError);
  }

  TEST_CASE("schema errors carry their location") {
    auto location = [](const char* doc) -> std::string {
      try {
        parse_scenario(doc);
      } catch (const SchemaError& e) {
        return e.location();
      }
      return "";
    };
    CHECK(location(R"({"protocol":"qkd","n":2,"bitstrings":{},"colour":"blue"})") == "/colour");
    CHECK(location(R"({"protocol":"qkd","n":"two","bitstrings":{}})") == "/n");
    CHECK(location(R"({"protocol":"qkd","n":2})") == "/");
    CHECK(location(R"({"protocol":"qkd","n":2,"bitstrings":{"b":{"Alice":[0,1]}}})") == "/bitstrings/b/Alice/0");
    CHECK(location(R"({"protocol":"qkd",)") == "/");
  }

  TEST_CASE("unbalanced rows need an explicit override") {
    const char* doc = R"({"protocol":"qkd","n":2,"allowUnbalanced":true,
      "bitstrings":{"b":{"Alice":["0","0"],"Bob":["0","0"]},"d":{"Alice":["1","1"]}}})";
    CHECK_NOTHROW(parse_scenario(doc));
  }

  TEST_CASE("scenario json round-trips") {
    for (const std::string name : {"qkd-2q", "qkd-4q", "qbc-2q", "qbc-4q"}) {
      const ProtocolSpec spec = builtin(name, ChannelAssumptions::from_auth_list("done,verif"));
      ScenarioDocument doc = parse_scenario_json(scenario_to_json(spec));
      CAPTURE(name);
      CHECK(scenario_to_json(doc.spec) == scenario_to_json(spec));
    }
  }

  TEST_CASE("channel flags") {
    ChannelAssumptions c = ChannelAssumptions::from_auth_list("Done, matchingbases ,VERIF");
    CHECK(c.auth_done);
    CHECK_FALSE(c.auth_bases);
    CHECK(c.auth_matching_bases);
    CHECK(c.auth_verif);
    CHECK(c.auth_list() == "done,matchingBases,verif");
    CHECK(ChannelAssumptions::from_auth_list("none") == ChannelAssumptions{});
    CHECK(ChannelAssumptions::from_auth_list("") == ChannelAssumptions{});
    CHECK_THROWS_AS(ChannelAssumptions::from_auth_list("done,keys"), ValidationError);
  }

  TEST_CASE("authentic channels are read-only for the intruder") {
    CHECK(intruder_reads(ChannelMode::Open));
    CHECK(intruder_writes(ChannelMode::Open));
    CHECK(intruder_reads(ChannelMode::Authentic));
    CHECK_FALSE(intruder_writes(ChannelMode::Authentic));
    CHECK_FALSE(intruder_reads(ChannelMode::ConfidentialWritable));
    CHECK(intruder_writes(ChannelMode::ConfidentialWritable));
    const ProtocolSpec spec = builtin("qkd-2q", ChannelAssumptions::from_auth_list("verif"));
    CHECK(spec.mode("verif") == ChannelMode::Authentic);
    CHECK(spec.mode("done") == ChannelMode::Open);
    CHECK(spec.mode("keycheck") == ChannelMode::ConfidentialAuthentic);
  }

  TEST_CASE("honest comparisons never use eqE") {
    reset_compare_site_audit();
    for (const CatalogEntry& e : catalog()) {
      const ProtocolSpec spec = builtin(e.name);
      for (const std::string& preset : threat_preset_names()) {
        Explorer ex(spec, threat_preset(preset));
        checks::honest_run(ex);
        std::mt19937_64 rng(e.qubits * 31 + preset.size());
        for (int i = 0; i < 20; ++i) checks::random_walk(ex, rng, 12);
      }
    }
    CHECK(eq_e_calls_from_compare_sites() == 0);
  }

  TEST_CASE("order keeps the bases back until every measurement is done") {
    const ProtocolSpec spec = builtin("qkd-2q", ChannelAssumptions::from_auth_list("", true));
    Explorer ex(spec, threat_preset("full"));
    const std::size_t bob = spec.role_index("Bob");
    std::mt19937_64 rng(13);
    for (int i = 0; i < 300; ++i) {
      ExecutionState s = checks::random_walk(ex, rng, 6);
      bool bob_measured = false;
      for (const TraceStep& st : s.trace()) {
        if (st.kind == StepKind::DeliverQubits && st.recipient == "Bob") bob_measured = true;
        if (st.kind == StepKind::Release) CHECK(bob_measured);
      }
      if (s.mailbox.count("bases")) CHECK(s.roles[bob].pc > 0);
    }
  }

  TEST_CASE("actions describe themselves") {
    CHECK(describe(act::Finish{}) == "finish");
    CHECK(describe(act::Select{"d", "v", "dv"}) == "?dv := ?d[?v]");
    CHECK(position_label(3) == "3");
    CHECK(position_index(Term::constant("3")) == 3u);
    CHECK_FALSE(position_index(Term::constant("x")));
  }
}
