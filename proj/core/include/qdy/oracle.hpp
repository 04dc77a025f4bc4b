#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdy::oracle {

using Complex = std::complex<double>;

class NonUnitary : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class WireOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};
class IncompleteOperators : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kTolerance = 1e-12;

/// Dense square complex matrix, row major.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t dim) : dim_(dim), data_(dim * dim) {}
  Matrix(std::size_t dim, std::vector<Complex> data);

  static Matrix identity(std::size_t dim);
  std::size_t dim() const { return dim_; }
  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
  Matrix adjoint() const;
  Matrix operator*(const Matrix& o) const;
  Matrix operator+(const Matrix& o) const;
  bool approx(const Matrix& o, double tol = kTolerance) const;

 private:
  std::size_t dim_ = 0;
  std::vector<Complex> data_;
};

bool is_unitary(const Matrix& m, double tol = kTolerance);

/// Amplitudes over 2^w basis states; wire 0 is the most significant bit.
struct StateVector {
  std::vector<Complex> amplitudes;

  static StateVector basis(std::size_t wires, std::size_t index);
  std::size_t wires() const;
  double norm() const;
  Complex inner(const StateVector& o) const;  // <this|o>
  bool approx(const StateVector& o, double tol = kTolerance) const;
  std::string str() const;
};

/// An operator on a subset of wires. Gates must be unitary; measurement
/// operators need not be.
struct Gate {
  Matrix matrix;
  std::vector<std::size_t> wires;
};

Gate hadamard(std::size_t wire);
Gate pauli_x(std::size_t wire);
Gate cnot(std::size_t control, std::size_t target);

/// U|psi>. Throws NonUnitary or WireOutOfRange.
StateVector apply_gate(const StateVector& s, const Gate& g);
/// M|psi> without the unitarity check.
StateVector apply_operator(const StateVector& s, const Gate& m);

struct Outcome {
  double probability = 0;
  StateVector post;  // normalised; empty when the probability is 0
};

/// Postulate-style measurement: p(m) = <psi|M_m^dagger M_m|psi>.
std::vector<Outcome> measure_outcome_distribution(const StateVector& s, const std::vector<Gate>& operators);

std::vector<Gate> computational_basis(std::size_t wire);
std::vector<Gate> hadamard_basis(std::size_t wire);

/// H on the first wire then CNOT, applied to the basis state |ab> (index 0..3).
StateVector bell_circuit(std::size_t input);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  bool passed() const;
  std::string str() const;
};

/// Runs the matching-basis, wrong-basis and EPR anti-correlation checks.
Report symbolic_semantics_report();
/// As above, but throws ValidationFailure naming the first failed check.
Report validate_symbolic_semantics();

}  // namespace qdy::oracle
