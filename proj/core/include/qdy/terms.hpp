#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qdy {

class TermError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Function symbols of the signature. Public constants are arity-0 and are
/// represented by Term::Kind::Const instead.
enum class Symbol : std::uint8_t { Senc, Pair, Bit, Qubit, QubitEpr };

int arity(Symbol s);
std::string_view symbol_name(Symbol s);
std::optional<Symbol> symbol_from_name(std::string_view name);

/// Immutable, structurally shared symbolic term.
///
/// Names are private atoms (the secret seed, fresh measurement outcomes, EPR
/// identifiers); constants are public. Var only appears inside role programs
/// and input patterns and never in a runtime term.
class Term {
 public:
  enum class Kind : std::uint8_t { Name, Const, App, Var };

  Term();  // the constant ''

  static Term name(std::string label);
  static Term constant(std::string label);
  static Term var(std::string label);
  static Term app(Symbol symbol, std::vector<Term> args);

  Kind kind() const;
  bool is_name() const { return kind() == Kind::Name; }
  bool is_const() const { return kind() == Kind::Const; }
  bool is_app() const { return kind() == Kind::App; }
  bool is_var() const { return kind() == Kind::Var; }
  bool is_app(Symbol s) const { return is_app() && symbol() == s; }

  /// Label of a name, constant or variable. Empty for applications.
  const std::string& label() const;
  Symbol symbol() const;
  std::span<const Term> args() const;
  const Term& arg(std::size_t i) const { return args()[i]; }

  std::size_t hash() const;
  std::size_t size() const;  // node count
  bool is_ground() const;

  /// Structural equality. Use eq_e() at sites that must be auditable.
  friend bool operator==(const Term& a, const Term& b);
  /// Total order, deterministic across runs (no pointer or hash ordering).
  friend std::strong_ordering operator<=>(const Term& a, const Term& b);

  std::string str() const;

 private:
  struct Node;
  explicit Term(std::shared_ptr<const Node> node);
  static Term atom(Kind kind, std::string label);
  std::shared_ptr<const Node> node_;
};

struct TermHash {
  std::size_t operator()(const Term& t) const { return t.hash(); }
};

/// Parses the canonical textual form produced by Term::str().
/// Names print as `~label`, EPR identifiers as `#label`, constants as
/// `'label'`, variables as `?label`, pairs as `<a,b>`.
Term parse_term(std::string_view text);

// Constructors for the protocol signature.
Term senc(Term m, Term k);
Term pair(Term a, Term b);
Term bit(Term seed, std::string_view bitstring, std::string_view position, std::string_view role,
         std::string_view value);
Term qubit(Term data, Term base);
Term qubit_epr(Term base, Term data, Term id);

/// Right-nested pairs; a single element is returned as is, an empty list as
/// the constant 'nil'.
Term tuple(std::span<const Term> items);
Term tuple(std::initializer_list<Term> items);
/// Splits a right-nested tuple of exactly `count` components.
std::optional<std::vector<Term>> untuple(const Term& t, std::size_t count);

/// Read-only view over a bit/5 term.
struct BitView {
  Term seed;
  Term bitstring;
  Term position;
  Term role;
  Term value;

  static std::optional<BitView> of(const Term& t);
};

/// Returns the complementary value constant ('0' <-> '1'), if `value` is one.
std::optional<Term> flip_value(const Term& value);

/// Which bitstrings compare equal across positions for honest agents.
struct InterchangeabilityConfig {
  std::set<std::string> cross_position_bitstrings;
  friend bool operator==(const InterchangeabilityConfig&, const InterchangeabilityConfig&) = default;
};

/// Equality used by the intruder and by security properties. The signature
/// carries no equations, so this is syntactic equality.
bool eq_e(const Term& a, const Term& b);

/// Equality used by honest agents: bits that differ only in the role (and,
/// for configured bitstrings, the position) are interchangeable; lifted
/// congruently through every function symbol.
bool eq_b(const Term& a, const Term& b, const InterchangeabilityConfig& cfg);

/// Representative of the eqB class of `t`: roles of bit terms are erased and,
/// for cross-position bitstrings, positions too. eq_b(a,b) iff keys are equal.
Term interchangeability_key(const Term& t, const InterchangeabilityConfig& cfg);

/// Audit counters for eq_e calls made while a compare-site scope is open.
/// Honest comparisons must never reach eq_e.
class CompareSiteScope {
 public:
  CompareSiteScope();
  ~CompareSiteScope();
  CompareSiteScope(const CompareSiteScope&) = delete;
  CompareSiteScope& operator=(const CompareSiteScope&) = delete;
};
std::uint64_t eq_e_calls_from_compare_sites();
void reset_compare_site_audit();

/// Monotone supply of fresh names. Labels are derived from a hint so that the
/// same creation context yields the same label on every branch.
class NameSupply {
 public:
  Term fresh(std::string_view hint);
  Term fresh_epr_id(std::string_view hint);
  bool used(std::string_view label) const;
  std::size_t issued() const { return used_.size(); }

 private:
  std::string claim(std::string base);
  std::set<std::string, std::less<>> used_;
};

}  // namespace qdy
