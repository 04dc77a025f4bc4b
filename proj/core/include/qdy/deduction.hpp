#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdy/ledger.hpp"
#include "qdy/restrictions.hpp"
#include "qdy/terms.hpp"

namespace qdy {

/// Intruder capabilities that a threat model may switch on. The classical
/// rules (membership, constants, composition, projection, decryption) are
/// always available.
enum class ThreatRule : std::uint8_t { IdQ, Measure, Forge, Epr, EprLeak, Guess, Complem };

std::string_view threat_rule_name(ThreatRule r);
std::optional<ThreatRule> threat_rule_from_name(std::string_view name);

class ThreatRuleSet {
 public:
  ThreatRuleSet() = default;
  ThreatRuleSet(std::initializer_list<ThreatRule> rules) : rules_(rules) {}
  explicit ThreatRuleSet(std::set<ThreatRule> rules) : rules_(std::move(rules)) {}

  bool has(ThreatRule r) const { return rules_.count(r) > 0; }
  ThreatRuleSet with(ThreatRule r) const;
  ThreatRuleSet without(ThreatRule r) const;
  bool subset_of(const ThreatRuleSet& other) const;
  const std::set<ThreatRule>& rules() const { return rules_; }
  std::string str() const;

  friend bool operator==(const ThreatRuleSet&, const ThreatRuleSet&) = default;

 private:
  std::set<ThreatRule> rules_;
};

enum class Rule : std::uint8_t {
  Member,
  PublicConst,
  Compose,
  Project,
  Decrypt,
  Complem,
  Guess,
  EprLeak,
  IdQ,
  Measure,
  Forge,
  Epr,
};

std::string_view rule_name(Rule r);

struct Derivation;
using DerivationPtr = std::shared_ptr<const Derivation>;

/// Proof tree for Γ;Δ;S ⊢ M or ⊢_Q M.
struct Derivation {
  Term conclusion;
  Rule rule = Rule::Member;
  std::vector<DerivationPtr> premises;
  std::optional<GuessKey> guess;  // Guess
  std::string ref;                // qubit id (ID_Q), EPR id (Epr, Epr-Leak), symbol (Compose)

  static DerivationPtr leaf(Term conclusion, Rule rule, std::string ref = {});
  static DerivationPtr node(Term conclusion, Rule rule, std::vector<DerivationPtr> premises, std::string ref = {});

  /// Replays the rule instances of the tree.
  void collect(std::set<GuessKey>& guesses, std::set<std::string>& consumed, std::set<std::string>& epr_ids) const;
  bool uses(Rule r) const;
  std::size_t count(Rule r) const;
  std::size_t size() const;
  nlohmann::json to_json() const;
};

enum class QubitStatus : std::uint8_t { Available, Consumed, Expired };

struct DeltaEntry {
  std::string id;
  Term qubit;
  QubitStatus status = QubitStatus::Available;
};

struct EprRecord {
  Term outcome;
  Term base;
  friend bool operator==(const EprRecord&, const EprRecord&) = default;
};

/// Intruder hypotheses Γ; Δ; S.
struct KnowledgeState {
  std::set<Term> gamma;
  std::vector<DeltaEntry> delta;
  std::map<std::string, EprRecord> epr_log;

  bool learn(const Term& t) { return gamma.insert(t).second; }
  void add_qubit(std::string id, Term q);
  const DeltaEntry* qubit(std::string_view id) const;
  DeltaEntry* qubit(std::string_view id);
  bool consume(std::string_view id);
  void expire_available();
  std::size_t available() const;
};

/// Finite label sets of the scenario, used to enumerate interchangeable
/// variants of a bit.
struct Universe {
  std::vector<std::string> bitstrings;
  std::vector<std::string> roles;
  std::vector<std::string> positions;
  std::vector<std::string> values{"0", "1"};
};

struct DeductionContext {
  const KnowledgeState* state = nullptr;
  ThreatRuleSet rules;
  InterchangeabilityConfig cfg;
  Universe universe;
  Term seed;  // the protocol-wide secret seed
  const GuessLedger* ledger = nullptr;
  const RestrictionSet* restrictions = nullptr;  // when set, inadmissible guesses are pruned
  int depth_bound = 4;
};

/// One Pareto-minimal way of deducing a term.
struct Deduction {
  DerivationPtr derivation;
  std::set<GuessKey> guesses;       // not already in the ledger
  std::set<std::string> consumed;   // Δ ids used by ID_Q
  std::set<std::string> epr_ids;    // fresh EPR ids allocated

  bool dominates(const Deduction& other) const;
  bool zero_cost() const { return guesses.empty() && consumed.empty(); }
};

struct DeductionResult {
  std::vector<Deduction> deductions;
  bool depth_bound_exceeded = false;

  bool derivable() const { return !deductions.empty(); }
  const Deduction* cheapest() const;
};

/// Goal-directed deducibility: decompose the knowledge once, then compose
/// towards the target. Results are memoised per instance, so an instance
/// must not outlive the state it was built for.
class Deducer {
 public:
  explicit Deducer(DeductionContext ctx);

  DeductionResult classical(const Term& target);
  DeductionResult quantum(const Term& target);

  /// Every term of the eqB class of `t` that the universe can express: role
  /// variants of a bit, plus position variants for cross-position bitstrings.
  std::vector<Term> class_variants(const Term& t) const;

  const DeductionContext& context() const { return ctx_; }
  const std::map<Term, DerivationPtr>& analysed() const { return analysed_; }

 private:
  struct Memo {
    int depth = -1;
    std::vector<Deduction> results;
    bool bound_hit = false;
  };

  void analyse();
  std::vector<Deduction> derive(const Term& t, int depth, bool& bound_hit, bool& cut);
  bool admissible(const std::set<GuessKey>& guesses) const;

  DeductionContext ctx_;
  std::map<Term, DerivationPtr> analysed_;
  std::unordered_map<Term, Memo, TermHash> memo_;
  std::set<Term> in_progress_;
};

DeductionResult deduce_classical(const DeductionContext& ctx, const Term& target);
DeductionResult deduce_quantum(const DeductionContext& ctx, const Term& target);

/// Adds `d` to a Pareto frontier unless an equal or cheaper entry exists.
void pareto_insert(std::vector<Deduction>& frontier, Deduction d);

class NotAQubit : public TermError {
 public:
  using TermError::TermError;
};

struct HonestMeasurement {
  Term outcome;
  std::optional<std::pair<std::string, EprRecord>> epr_event;
};

/// Honest measurement of `q` in `base`: the encoded bit when the bases are
/// interchangeable, a fresh name otherwise. Measuring an EPR half also
/// reports what was observed in which base.
HonestMeasurement measure_honest(const Term& q, const Term& base, const InterchangeabilityConfig& cfg,
                                 NameSupply& names, std::string_view hint);

/// Public seed of bits produced by the intruder himself.
Term attacker_seed();
Term attacker_bit(std::string_view value);
bool is_attacker_bit(const Term& t);

}  // namespace qdy
