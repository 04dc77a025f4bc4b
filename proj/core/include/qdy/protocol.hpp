#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdy/deduction.hpp"
#include "qdy/restrictions.hpp"
#include "qdy/terms.hpp"

namespace qdy {

class PatternMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string location, const std::string& what)
      : std::runtime_error(location + ": " + what), location_(std::move(location)) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How a classical channel may be used by the intruder.
enum class ChannelMode : std::uint8_t {
  Open,                   // read and write
  Authentic,              // read only; the recipient gets the honest output
  ConfidentialWritable,   // write only; the honest output can be forwarded but not read
  ConfidentialAuthentic,  // neither
};

std::string_view channel_mode_name(ChannelMode m);
bool intruder_reads(ChannelMode m);
bool intruder_writes(ChannelMode m);

struct ChannelAssumptions {
  bool auth_done = false;
  bool auth_bases = false;
  bool auth_matching_bases = false;
  bool auth_verif = false;
  bool order = false;

  /// Parses a comma separated subset of done, bases, matchingBases, verif.
  static ChannelAssumptions from_auth_list(std::string_view csv, bool order = false);
  std::string auth_list() const;
  std::string str() const;
  friend bool operator==(const ChannelAssumptions&, const ChannelAssumptions&) = default;
};

/// Role environment: scalar terms and position-indexed lists.
struct Env {
  std::map<std::string, Term> terms;
  std::map<std::string, std::vector<Term>> lists;

  const Term& term(const std::string& name) const;
  const std::vector<Term>& list(const std::string& name) const;
  bool bound(const std::string& name) const { return terms.count(name) || lists.count(name); }
};

/// Instantiates the variables of `pattern`; list variables become tuples.
Term substitute(const Term& pattern, const Env& env);

/// A reference to honest data that a received value is compared against.
struct Ref {
  std::string var;
  std::string index;  // when set: element of list `var` at the position bound to `index`
  bool each = false;  // every element of list `var`
};

enum class HoleKind : std::uint8_t { Compare, Member, Subset };

/// A component of a received message chosen by the intruder.
struct Hole {
  HoleKind kind = HoleKind::Compare;
  std::string bind;
  std::vector<Ref> refs;     // Compare
  bool observable = false;   // the exact term matters, not only which refs it matches
  std::string set;           // Member, Subset
  std::size_t min_size = 0;  // Subset
};

/// A tuple of Compare holes, one per element of the position list `over`,
/// each compared to `list` at that position.
struct EachHole {
  std::string over;
  std::string list;
  std::string bind;
};

namespace act {
struct SendQuantum {
  std::string payload;  // list of data bits
  std::string bases;    // list of bases
};
struct RecvMeasure {
  std::string bases;
  std::string bind;
};
struct Send {
  std::string channel;
  Term message;
  bool ordered = false;  // waits for every measurement, then retires unused qubits
};
struct Recv {
  std::string channel;
  std::optional<Term> constant;
  std::vector<Hole> holes;
  std::optional<EachHole> each;
};
struct MatchPositions {
  std::string lhs;  // list, or a scalar compared with every element of rhs
  std::string rhs;
  std::string bind;
  std::size_t threshold = 0;
};
struct SplitLast {
  std::string set;
  std::string last;
  std::string rest;
};
struct RequireMember {
  std::string element;
  std::string set;
};
struct RequireSize {
  std::string set;
  std::size_t min = 0;
};
struct Remove {
  std::string set;
  std::string element;
  std::string bind;
};
struct Select {
  std::string list;
  std::string index;
  std::string bind;
};
struct SelectEach {
  std::string list;
  std::string indices;
  std::string bind;
};
struct CompareB {
  Term lhs;
  Term rhs;
};
struct Event {
  std::string label;
  std::vector<std::string> args;
};
struct Finish {};
}  // namespace act

using Action = std::variant<act::SendQuantum, act::RecvMeasure, act::Send, act::Recv, act::MatchPositions,
                            act::SplitLast, act::RequireMember, act::RequireSize, act::Remove, act::Select,
                            act::SelectEach, act::CompareB, act::Event, act::Finish>;

std::string describe(const Action& a);

struct Role {
  std::string name;
  std::vector<Action> program;
  Env initial;
};

enum class RoleStatus : std::uint8_t { Running, Aborted, Finished };
std::string_view role_status_name(RoleStatus s);

struct RoleState {
  std::size_t pc = 0;
  Env env;
  RoleStatus status = RoleStatus::Running;
};

struct EventRecord {
  std::string role;
  std::string label;
  std::vector<std::vector<Term>> args;
};

struct Output {
  std::string channel;
  Term message;
  bool quantum = false;
  std::string qubit_id;
};

/// Input for the action at the program counter: a classical message, or one
/// qubit per measured position.
struct RoleInput {
  std::optional<Term> message;
  std::vector<Term> qubits;
};

struct StepOutcome {
  RoleState next;
  std::vector<Output> outputs;
  std::vector<EventRecord> events;
  std::vector<std::pair<std::string, EprRecord>> epr_events;
  std::string note;
};

struct ScenarioConfig {
  std::string protocol;  // qkd | qbc
  int n = 0;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> bitstrings;  // bitstring -> role -> values
  std::vector<std::set<std::string>> same_value_groups;
  RestrictionSet restrictions;
  std::optional<std::size_t> threshold;
  bool allow_unbalanced = false;
  std::set<std::string> cross_position;

  void validate() const;
  const std::vector<std::string>& row(const std::string& bitstring, const std::string& role) const;
};

struct PropertySpec {
  enum class Kind : std::uint8_t { Secrecy, Binding };
  Kind kind = Kind::Secrecy;
  std::string role;   // viewpoint for secrecy, accepting role for binding
  std::string label;  // event carrying the claim
  Term target;        // binding: value revealed only after the commitment

  std::string str() const;
};

struct ProtocolSpec {
  std::string name;
  ScenarioConfig scenario;
  std::vector<Role> roles;
  InterchangeabilityConfig cfg;
  ChannelAssumptions channels;
  std::map<std::string, ChannelMode> channel_modes;
  PropertySpec property;
  Term seed;
  std::set<Term> initial_knowledge;
  Universe universe;
  std::set<ThreatRule> forbidden_rules;  // never granted, whatever the threat model
  std::string default_threat;
  std::size_t threshold = 0;

  const Role& role(const std::string& name) const;
  std::size_t role_index(const std::string& name) const;
  ChannelMode mode(const std::string& channel) const;
  /// Payloads of honest quantum outputs, with every position instantiated.
  std::vector<Term> honest_payloads() const;
  void validate() const;
};

/// Executes the action at the role's program counter.
StepOutcome step_role(const Role& role, const RoleState& state, const RoleInput& input, NameSupply& names,
                      const InterchangeabilityConfig& cfg);

bool waits_for_input(const Action& a);

/// Builds the message a Recv action expects from its hole values.
Term assemble_message(const act::Recv& recv, const std::vector<Term>& static_values,
                      const std::optional<std::vector<Term>>& each_values);

std::string position_label(std::size_t i);  // 1-based
std::optional<std::size_t> position_index(const Term& t);

/// Default caps: half the positions per bitstring and role, a quarter per
/// same-value group; QBC additionally forbids guessing any base.
RestrictionSet scenario_default_restrictions(const ScenarioConfig& sc);

ProtocolSpec make_qkd_spec(const ScenarioConfig& scenario, const ChannelAssumptions& channels,
                           const std::string& view = "Bob");
ProtocolSpec make_qbc_spec(const ScenarioConfig& scenario);

struct ScenarioDocument {
  ProtocolSpec spec;
  std::optional<std::string> threat_model;
};

ScenarioDocument parse_scenario(std::string_view document);
ScenarioDocument parse_scenario_json(const nlohmann::json& document);
nlohmann::json scenario_to_json(const ProtocolSpec& spec);

}  // namespace qdy
