#include "doctest.h"

#include <cmath>
#include <random>

#include "qdy/oracle.hpp"

using namespace qdy::oracle;

namespace {

const double r2 = 1.0 / std::sqrt(2.0);

StateVector vec(std::vector<Complex> a) { return StateVector{std::move(a)}; }

Gate random_gate(std::mt19937_64& rng, std::size_t wires) {
  std::uniform_int_distribution<std::size_t> wire(0, wires - 1);
  const int kind = std::uniform_int_distribution<int>(0, wires > 1 ? 2 : 1)(rng);
  if (kind == 0) return hadamard(wire(rng));
  if (kind == 1) return pauli_x(wire(rng));
  std::size_t c = wire(rng);
  std::size_t t = wire(rng);
  while (t == c) t = wire(rng);
  return cnot(c, t);
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("hadamard on basis states") {
    const StateVector plus = apply_gate(StateVector::basis(1, 0), hadamard(0));
    CHECK(plus.approx(vec({r2, r2})));
    const StateVector minus = apply_gate(StateVector::basis(1, 1), hadamard(0));
    CHECK(minus.approx(vec({r2, -r2})));
    CHECK(apply_gate(plus, hadamard(0)).approx(StateVector::basis(1, 0)));
  }

  TEST_CASE("gate preconditions") {
    CHECK_THROWS_AS(apply_gate(StateVector::basis(1, 0), hadamard(1)), WireOutOfRange);
    Gate bad{Matrix(2, {1, 1, 0, 1}), {0}};
    CHECK_THROWS_AS(apply_gate(StateVector::basis(1, 0), bad), NonUnitary);
    CHECK_NOTHROW(apply_operator(StateVector::basis(1, 0), bad));
    CHECK(is_unitary(cnot(0, 1).matrix));
  }

  TEST_CASE("measurement distributions") {
    const StateVector plus = vec({r2, r2});
    auto d = measure_outcome_distribution(plus, computational_basis(0));
    REQUIRE(d.size() == 2);
    CHECK(d[0].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[1].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[0].post.approx(StateVector::basis(1, 0)));

    auto z = measure_outcome_distribution(StateVector::basis(1, 0), computational_basis(0));
    CHECK(z[0].probability == doctest::Approx(1.0));
    CHECK(z[1].probability == doctest::Approx(0.0));
    CHECK(z[1].post.amplitudes.empty());

    std::vector<Gate> partial{computational_basis(0)[0]};
    CHECK_THROWS_AS(measure_outcome_distribution(plus, partial), IncompleteOperators);
  }

  TEST_CASE("singlet measured on the first wire") {
    const StateVector singlet = bell_circuit(3);
    auto d = measure_outcome_distribution(singlet, computational_basis(0));
    CHECK(d[0].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[1].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::norm(d[0].post.inner(StateVector::basis(2, 0b01))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::norm(d[1].post.inner(StateVector::basis(2, 0b10))) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("bell circuit mappings") {
    CHECK(bell_circuit(0).approx(vec({r2, 0, 0, r2})));
    CHECK(bell_circuit(1).approx(vec({0, r2, r2, 0})));
    CHECK(bell_circuit(2).approx(vec({r2, 0, 0, -r2})));
    CHECK(bell_circuit(3).approx(vec({0, r2, -r2, 0})));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(bell_circuit(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t j = i + 1; j < 4; ++j) CHECK(std::abs(bell_circuit(i).inner(bell_circuit(j))) < 1e-12);
    }
  }

  TEST_CASE("symbolic semantics report") {
    Report r = validate_symbolic_semantics();
    CHECK(r.passed());
    CHECK(r.checks.size() == 3);
    for (const Check& c : r.checks) CHECK(c.passed);
  }

  TEST_CASE("encoded bits in the hadamard basis") {
    const StateVector one_x = apply_gate(StateVector::basis(1, 1), hadamard(0));
    auto same = measure_outcome_distribution(one_x, hadamard_basis(0));
    CHECK(same[1].probability == doctest::Approx(1.0).epsilon(1e-12));
    auto other = measure_outcome_distribution(StateVector::basis(1, 0), hadamard_basis(0));
    CHECK(other[0].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(other[1].probability == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("random circuits preserve the norm") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
      const std::size_t wires = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
      StateVector s = StateVector::basis(wires, std::uniform_int_distribution<std::size_t>(0, (1u << wires) - 1)(rng));
      Matrix total = Matrix::identity(std::size_t{1} << wires);
      const int gates = std::uniform_int_distribution<int>(1, 6)(rng);
      for (int g = 0; g < gates; ++g) {
        const Gate gate = random_gate(rng, wires);
        CHECK(is_unitary(gate.matrix, 1e-10));
        s = apply_gate(s, gate);
      }
      CHECK(std::abs(s.norm() - 1.0) < 1e-10);
      auto d = measure_outcome_distribution(s, computational_basis(0));
      CHECK(std::abs(d[0].probability + d[1].probability - 1.0) < 1e-10);
    }
  }

  TEST_CASE("no single basis tells all four encoding states apart") {
    const std::vector<StateVector> states{StateVector::basis(1, 0), StateVector::basis(1, 1), vec({r2, r2}),
                                          vec({r2, -r2})};
    for (const auto& basis : {computational_basis(0), hadamard_basis(0)}) {
      int certain = 0;
      for (const StateVector& s : states) {
        auto d = measure_outcome_distribution(s, basis);
        if (std::abs(d[0].probability - 1.0) < 1e-12 || std::abs(d[1].probability - 1.0) < 1e-12) ++certain;
      }
      CHECK(certain == 2);
    }
  }

  TEST_CASE("encoding states overlap") {
    const StateVector zero = StateVector::basis(1, 0);
    const StateVector plus = vec({r2, r2});
    CHECK(std::norm(plus.inner(zero)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::norm(vec({r2, -r2}).inner(plus)) < 1e-12);
  }
}
