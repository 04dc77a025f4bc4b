#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>

namespace qdy {

/// Identity of a Guess rule instance.
struct GuessKey {
  std::string bitstring;
  std::string role;
  std::string position;

  friend auto operator<=>(const GuessKey&, const GuessKey&) = default;
  std::string str() const { return "Guess(" + bitstring + "," + role + "," + position + ")"; }
};

/// Guess instances spent along one execution. A key is stored once, however
/// often the same bit is guessed.
class GuessLedger {
 public:
  GuessLedger() = default;
  explicit GuessLedger(std::set<GuessKey> keys) : keys_(std::move(keys)) {}

  bool add(const GuessKey& k) { return keys_.insert(k).second; }
  void merge(const std::set<GuessKey>& ks) { keys_.insert(ks.begin(), ks.end()); }
  bool contains(const GuessKey& k) const { return keys_.count(k) > 0; }
  bool guessed_position(const std::string& position) const;

  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  const std::set<GuessKey>& keys() const { return keys_; }

  std::map<std::pair<std::string, std::string>, std::size_t> counts() const;
  std::set<std::string> guessed_positions() const;

  /// Keys of `ks` not yet in the ledger.
  std::set<GuessKey> delta(const std::set<GuessKey>& ks) const;

  friend bool operator==(const GuessLedger&, const GuessLedger&) = default;

 private:
  std::set<GuessKey> keys_;
};

}  // namespace qdy
