#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdy/deduction.hpp"
#include "qdy/ledger.hpp"
#include "qdy/protocol.hpp"

namespace qdy {

class ResourceExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SearchOrder : std::uint8_t { BreadthFirst, DepthFirst };

struct ExplorationBounds {
  std::size_t max_depth = 32;           // explicit steps per execution
  std::size_t max_states = 2'000'000;   // distinct states before giving up
  std::size_t max_candidates = 20'000;  // intruder inputs per step
  int deduction_depth = 4;
  unsigned workers = 1;
  SearchOrder order = SearchOrder::BreadthFirst;
};

enum class StepKind : std::uint8_t { Deliver, DeliverQubits, Measure, Release, Violation };
std::string_view step_kind_name(StepKind k);

struct TraceStep {
  std::size_t index = 0;
  StepKind kind = StepKind::Deliver;
  std::string actor;      // "Intruder" or a role
  std::string recipient;  // role receiving the input
  std::string channel;
  std::optional<Term> message;
  std::vector<std::string> slots;  // per-qubit choices of a DeliverQubits step
  bool injected = false;           // the recipient got something other than an honest output
  std::set<GuessKey> guesses;      // new ledger entries
  std::set<std::string> consumed;  // Δ ids
  std::set<std::string> epr_ids;
  std::vector<DerivationPtr> derivations;
  std::vector<std::string> effects;  // honest actions run after the step
  std::string label;                 // identifies the step among its siblings

  nlohmann::json to_json() const;
};

struct HistoryNode {
  TraceStep step;
  std::shared_ptr<const HistoryNode> prev;
};

struct ExecutionState {
  std::vector<RoleState> roles;
  KnowledgeState knowledge;
  GuessLedger ledger;
  std::map<std::string, Term> mailbox;  // last honest output per channel
  std::vector<EventRecord> events;
  NameSupply names;
  std::shared_ptr<const HistoryNode> history;
  std::size_t depth = 0;

  std::vector<TraceStep> trace() const;
  /// Canonical text of everything that influences the future of the state.
  std::string canonical() const;
};

struct Successors {
  std::vector<ExecutionState> states;
  bool truncated = false;           // the candidate cap was hit
  bool deduction_bound_hit = false;
};

struct Violation {
  std::string description;
  DerivationPtr derivation;
  bool deduction_bound_hit = false;
};

/// The transition system of one protocol instance under one threat model.
class Explorer {
 public:
  Explorer(const ProtocolSpec& spec, ThreatRuleSet threat, ExplorationBounds bounds = {});

  ExecutionState initial() const;
  Successors successors(const ExecutionState& s) const;
  /// The property violation witnessed by `s`, if any. `bound_hit` is raised
  /// when a deduction stopped at the depth bound without success.
  std::optional<Violation> check(const ExecutionState& s, bool& bound_hit) const;

  const ProtocolSpec& spec() const { return spec_; }
  const ThreatRuleSet& threat() const { return threat_; }
  const ExplorationBounds& bounds() const { return bounds_; }

 private:
  DeductionContext context(const ExecutionState& s) const;
  void settle(ExecutionState& s, TraceStep& step) const;
  void apply(ExecutionState& s, const StepOutcome& out, TraceStep& step) const;
  void commit(const ExecutionState& from, ExecutionState next, TraceStep step, Successors& out) const;
  void classical_inputs(const ExecutionState& s, std::size_t role, Deducer& ded, Successors& out) const;
  void quantum_inputs(const ExecutionState& s, std::size_t role, Deducer& ded, Successors& out) const;
  void measurements(const ExecutionState& s, Deducer& ded, Successors& out) const;
  bool release_enabled(const ExecutionState& s) const;

  ProtocolSpec spec_;
  ThreatRuleSet threat_;
  ExplorationBounds bounds_;
};

enum class VerdictKind : std::uint8_t { Attack, Exhausted, Inconclusive };
std::string_view verdict_name(VerdictKind k);

struct ExplorationStats {
  std::size_t states = 0;
  std::size_t transitions = 0;
  std::size_t dedup_hits = 0;
  std::size_t depth_reached = 0;
  std::size_t terminal = 0;
  double seconds = 0;
};

struct AttackTrace {
  std::vector<TraceStep> steps;  // ends with the Violation pseudo-step
  std::vector<std::string> classification;
  std::string violation;
  GuessLedger ledger;
};

struct Verdict {
  VerdictKind kind = VerdictKind::Exhausted;
  std::optional<AttackTrace> attack;
  ExplorationStats stats;
  std::set<std::string> inconclusive_reasons;
  std::size_t max_depth = 0;

  int exit_code() const;
};

Verdict explore(const ProtocolSpec& spec, const ThreatRuleSet& threat, const ExplorationBounds& bounds = {});

/// Labels describing the shape of an attack: MitM, Done-injection, EPR,
/// Epr-Leak, Measure-resend, Guess, Binding.
std::vector<std::string> classify(const ProtocolSpec& spec, const std::vector<TraceStep>& steps);

/// Re-executes the trace step by step against the transition system and
/// checks that it ends in a violation.
bool replay(const Explorer& explorer, const AttackTrace& trace);

nlohmann::json verdict_to_json(const ProtocolSpec& spec, const ThreatRuleSet& threat, const Verdict& v);
std::string verdict_to_text(const ProtocolSpec& spec, const ThreatRuleSet& threat, const Verdict& v);
std::string trace_to_dot(const ProtocolSpec& spec, const AttackTrace& trace);

}  // namespace qdy
