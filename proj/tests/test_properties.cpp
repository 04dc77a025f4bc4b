#include "doctest.h"

#include "checks.hpp"

using namespace qdy::checks;

namespace {

constexpr std::size_t kCases = 1000;

void expect(const PropertyResult& r) {
  INFO(r.name << ": " << r.failures << " of " << r.cases << " failed, first: " << r.first_failure);
  CHECK(r.cases >= kCases);
  CHECK(r.failures == 0);
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("no-cloning audit") { expect(check_no_cloning(kCases, 101)); }
  TEST_CASE("ledger audit") { expect(check_ledger(kCases, 202)); }
  TEST_CASE("replay determinism") { expect(check_replay(kCases, 303)); }
  TEST_CASE("parallel and sequential exploration agree") { expect(check_parallel_agreement(kCases, 404)); }
  TEST_CASE("eqB congruence laws") { expect(check_eqb_congruence(kCases, 505)); }
}
