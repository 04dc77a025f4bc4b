#include "doctest.h"

#include <bit>
#include <cstdint>

#include "qdy/models.hpp"
#include "qdy/restrictions.hpp"

using namespace qdy;

namespace {

// Counts the n-bit strings agreeing with `target` on at least k positions.
Rational enumerate_tail(int n, int k, std::uint32_t target) {
  std::int64_t hits = 0;
  for (std::uint32_t x = 0; x < (1u << n); ++x) {
    const int agree = n - std::popcount((x ^ target) & ((1u << n) - 1));
    if (agree >= k) ++hits;
  }
  return Rational(hits, std::int64_t{1} << n);
}

GuessKey g(std::string bs, std::string role, std::string pos) { return GuessKey{std::move(bs), std::move(role), std::move(pos)}; }

RestrictionSet example_restrictions() { return qkd_scenario(4).restrictions; }

}  // namespace

TEST_SUITE("restrictions") {
  TEST_CASE("default budgets") {
    CHECK(default_budgets(4) == Budgets{2, 1});
    CHECK(default_budgets(2) == Budgets{1, 1});
    CHECK(default_budgets(8) == Budgets{4, 2});
    CHECK(default_budgets(24) == Budgets{12, 6});
    CHECK_THROWS_AS(default_budgets(3), InvalidParameter);
    CHECK_THROWS_AS(default_budgets(0), InvalidParameter);
  }

  TEST_CASE("exact tail probabilities") {
    CHECK(exact_tail_probability(4, 0) == Rational(1));
    CHECK(exact_tail_probability(4, 4) == Rational(1, 16));
    CHECK(exact_tail_probability(4, 2) == Rational(11, 16));
    CHECK(exact_tail_probability(4, 2) == enumerate_tail(4, 2, 0b0110));
    CHECK_THROWS_AS(exact_tail_probability(4, 5), InvalidParameter);
    CHECK_THROWS_AS(exact_tail_probability(25, 1), InvalidParameter);
  }

  TEST_CASE("tail agrees with enumeration up to 12 bits") {
    for (int n = 1; n <= 12; ++n) {
      const std::uint32_t target = (0x5a5u * static_cast<std::uint32_t>(n)) & ((1u << n) - 1);
      for (int k = 0; k <= n; ++k) {
        CAPTURE(n);
        CAPTURE(k);
        CHECK(exact_tail_probability(n, k) == enumerate_tail(n, k, target));
      }
    }
  }

  TEST_CASE("half tail closed form") {
    for (int n = 2; n <= 24; n += 2) {
      CAPTURE(n);
      const Rational closed = Rational(1, 2) + Rational(binomial(n, n / 2), std::int64_t{1} << (n + 1));
      CHECK(exact_tail_probability(n, n / 2) == closed);
      CHECK(exact_tail_probability(n, n / 2) > Rational(1, 2));
    }
  }

  TEST_CASE("tail is antitone in k") {
    for (int n = 0; n <= 24; ++n) {
      for (int k = 1; k <= n; ++k) CHECK(exact_tail_probability(n, k) <= exact_tail_probability(n, k - 1));
    }
  }

  TEST_CASE("four-qubit ledger cases") {
    const RestrictionSet rs = example_restrictions();
    CHECK(check_ledger(GuessLedger({g("b", "Alice", "1"), g("b", "Alice", "2")}), rs));
    CHECK(check_ledger(GuessLedger({g("b", "Alice", "1"), g("b", "Alice", "3")}), rs));
    CHECK_FALSE(check_ledger(GuessLedger({g("b", "Alice", "1"), g("b", "Alice", "3"), g("b", "Alice", "2")}), rs));
    CHECK_FALSE(check_ledger(GuessLedger({g("b", "Alice", "1"), g("d", "Bob", "4")}), rs));
    CHECK(check_ledger(GuessLedger({g("b", "Alice", "1"), g("d", "Bob", "2")}), rs));
    CHECK(check_ledger(GuessLedger{}, rs));
  }

  TEST_CASE("per bitstring caps without groups") {
    RestrictionSet rs;
    rs.default_cap = 2;
    CHECK(check_ledger(GuessLedger({g("b", "Alice", "1"), g("b", "Alice", "2")}), rs));
    CHECK_FALSE(check_ledger(GuessLedger({g("b", "Alice", "1"), g("b", "Alice", "2"), g("b", "Alice", "3")}), rs));
    CHECK(check_ledger(GuessLedger({g("b", "Alice", "1"), g("b", "Alice", "2"), g("b", "Bob", "3")}), rs));
    rs.per_bitstring_role[{"b", "Bob"}] = 0;
    CHECK_FALSE(check_ledger(GuessLedger({g("b", "Bob", "3")}), rs));
  }

  TEST_CASE("repeated guesses count once") {
    GuessLedger l;
    CHECK(l.add(g("d", "Alice", "1")));
    CHECK_FALSE(l.add(g("d", "Alice", "1")));
    CHECK(l.size() == 1);
    CHECK(l.delta({g("d", "Alice", "1"), g("d", "Alice", "2")}).size() == 1);
    CHECK(admissible(l, {g("d", "Alice", "1")}, example_restrictions()));
  }

  TEST_CASE("violations persist in supersets") {
    const RestrictionSet rs = example_restrictions();
    const std::vector<GuessKey> all{g("b", "Alice", "1"), g("b", "Alice", "2"), g("b", "Alice", "3"), g("b", "Bob", "4"),
                                    g("d", "Alice", "1"),  g("d", "Alice", "4"), g("b", "Bob", "2")};
    for (unsigned mask = 0; mask < (1u << all.size()); ++mask) {
      std::set<GuessKey> ks;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (mask & (1u << i)) ks.insert(all[i]);
      }
      if (check_ledger(GuessLedger(ks), rs)) continue;
      for (const GuessKey& extra : all) {
        std::set<GuessKey> more = ks;
        more.insert(extra);
        CHECK_FALSE(check_ledger(GuessLedger(more), rs));
      }
    }
  }

  TEST_CASE("group positions are validated") {
    RestrictionSet rs;
    rs.groups.push_back(RestrictionGroup{"g", {"1", "5"}, {}, {}, 1});
    CHECK_THROWS_AS(rs.validate(4), InvalidParameter);
    CHECK_NOTHROW(rs.validate(6));
  }
}
