#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "qdy/ledger.hpp"

namespace qdy {

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Rational = boost::rational<std::int64_t>;

struct Budgets {
  std::size_t half = 0;     // per bitstring and role
  std::size_t quarter = 0;  // per same-value group
  friend bool operator==(const Budgets&, const Budgets&) = default;
};

Budgets default_budgets(int n);

/// Probability that a uniformly random n-bit string agrees with a fixed one
/// on at least k positions: sum_{j>=k} C(n,j) / 2^n. Exact for n <= 24.
Rational exact_tail_probability(int n, int k);

std::int64_t binomial(int n, int k);

struct RestrictionGroup {
  std::string label;
  std::set<std::string> positions;
  std::set<std::string> bitstrings;  // empty: every bitstring
  std::set<std::string> roles;       // empty: every role
  std::size_t cap = 0;

  bool covers(const GuessKey& k) const;
};

struct RestrictionSet {
  std::map<std::pair<std::string, std::string>, std::size_t> per_bitstring_role;
  std::optional<std::size_t> default_cap;  // for (bitstring, role) pairs not listed
  std::vector<RestrictionGroup> groups;

  std::optional<std::size_t> cap_for(const std::string& bitstring, const std::string& role) const;
  void validate(int n) const;
};

bool check_ledger(const GuessLedger& ledger, const RestrictionSet& rs);
/// check_ledger on ledger plus extra keys, without materialising the union.
bool admissible(const GuessLedger& ledger, const std::set<GuessKey>& extra, const RestrictionSet& rs);

}  // namespace qdy
