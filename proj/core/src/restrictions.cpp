#include "qdy/restrictions.hpp"

#include <algorithm>

namespace qdy {

bool GuessLedger::guessed_position(const std::string& position) const {
  return std::any_of(keys_.begin(), keys_.end(), [&](const GuessKey& k) { return k.position == position; });
}

std::map<std::pair<std::string, std::string>, std::size_t> GuessLedger::counts() const {
  std::map<std::pair<std::string, std::string>, std::size_t> out;
  for (const GuessKey& k : keys_) ++out[{k.bitstring, k.role}];
  return out;
}

std::set<std::string> GuessLedger::guessed_positions() const {
  std::set<std::string> out;
  for (const GuessKey& k : keys_) out.insert(k.position);
  return out;
}

std::set<GuessKey> GuessLedger::delta(const std::set<GuessKey>& ks) const {
  std::set<GuessKey> out;
  for (const GuessKey& k : ks) {
    if (!contains(k)) out.insert(k);
  }
  return out;
}

Budgets default_budgets(int n) {
  if (n < 2 || n % 2 != 0) throw InvalidParameter("security parameter must be even and >= 2, got " + std::to_string(n));
  return Budgets{static_cast<std::size_t>(n / 2), static_cast<std::size_t>(std::max(1, n / 4))};
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Rational exact_tail_probability(int n, int k) {
  if (n < 0 || n > 24) throw InvalidParameter("n must be in [0,24], got " + std::to_string(n));
  if (k < 0 || k > n) throw InvalidParameter("k must be in [0,n], got " + std::to_string(k));
  std::int64_t hits = 0;
  for (int j = k; j <= n; ++j) hits += binomial(n, j);
  return Rational(hits, std::int64_t{1} << n);
}

bool RestrictionGroup::covers(const GuessKey& k) const {
  return positions.count(k.position) && (bitstrings.empty() || bitstrings.count(k.bitstring)) &&
         (roles.empty() || roles.count(k.role));
}

std::optional<std::size_t> RestrictionSet::cap_for(const std::string& bitstring, const std::string& role) const {
  auto it = per_bitstring_role.find({bitstring, role});
  if (it != per_bitstring_role.end()) return it->second;
  return default_cap;
}

void RestrictionSet::validate(int n) const {
  for (const RestrictionGroup& g : groups) {
    for (const std::string& p : g.positions) {
      int v = 0;
      try {
        v = std::stoi(p);
      } catch (const std::exception&) {
        throw InvalidParameter("group '" + g.label + "' has non-numeric position '" + p + "'");
      }
      if (v < 1 || v > n) throw InvalidParameter("group '" + g.label + "' position " + p + " outside [1," + std::to_string(n) + "]");
    }
  }
}

bool admissible(const GuessLedger& ledger, const std::set<GuessKey>& extra, const RestrictionSet& rs) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts = ledger.counts();
  std::vector<const GuessKey*> all;
  for (const GuessKey& k : ledger.keys()) all.push_back(&k);
  for (const GuessKey& k : extra) {
    if (ledger.contains(k)) continue;
    ++counts[{k.bitstring, k.role}];
    all.push_back(&k);
  }
  for (const auto& [key, count] : counts) {
    auto cap = rs.cap_for(key.first, key.second);
    if (cap && count > *cap) return false;
  }
  for (const RestrictionGroup& g : rs.groups) {
    std::size_t c = 0;
    for (const GuessKey* k : all) c += g.covers(*k) ? 1 : 0;
    if (c > g.cap) return false;
  }
  return true;
}

bool check_ledger(const GuessLedger& ledger, const RestrictionSet& rs) { return admissible(ledger, {}, rs); }

}  // namespace qdy
