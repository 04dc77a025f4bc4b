#include "qdy/oracle.hpp"

#include <cmath>
#include <sstream>

namespace qdy::oracle {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void check_wires(const StateVector& s, const Gate& g) {
  const std::size_t w = s.wires();
  if (g.matrix.dim() != (std::size_t{1} << g.wires.size())) {
    throw std::invalid_argument("operator dimension does not match its wire count");
  }
  for (std::size_t i = 0; i < g.wires.size(); ++i) {
    if (g.wires[i] >= w) throw WireOutOfRange("wire " + std::to_string(g.wires[i]) + " on a " + std::to_string(w) + "-wire state");
    for (std::size_t j = 0; j < i; ++j) {
      if (g.wires[i] == g.wires[j]) throw WireOutOfRange("wire " + std::to_string(g.wires[i]) + " used twice");
    }
  }
}

Matrix projector(Complex a, Complex b) {
  Matrix m(2);
  m(0, 0) = a * std::conj(a);
  m(0, 1) = a * std::conj(b);
  m(1, 0) = b * std::conj(a);
  m(1, 1) = b * std::conj(b);
  return m;
}

std::string fmt(double x) {
  std::ostringstream o;
  o.precision(6);
  o << x;
  return o.str();
}

}  // namespace

Matrix::Matrix(std::size_t dim, std::vector<Complex> data) : dim_(dim), data_(std::move(data)) {
  if (data_.size() != dim * dim) throw std::invalid_argument("matrix data size mismatch");
}

Matrix Matrix::identity(std::size_t dim) {
  Matrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::adjoint() const {
  Matrix m(dim_);
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t c = 0; c < dim_; ++c) m(c, r) = std::conj((*this)(r, c));
  }
  return m;
}

Matrix Matrix::operator*(const Matrix& o) const {
  Matrix m(dim_);
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t k = 0; k < dim_; ++k) {
      for (std::size_t c = 0; c < dim_; ++c) m(r, c) += (*this)(r, k) * o(k, c);
    }
  }
  return m;
}

Matrix Matrix::operator+(const Matrix& o) const {
  Matrix m(dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) m.data_[i] = data_[i] + o.data_[i];
  return m;
}

bool Matrix::approx(const Matrix& o, double tol) const {
  if (dim_ != o.dim_) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (std::abs(data_[i] - o.data_[i]) > tol) return false;
  }
  return true;
}

bool is_unitary(const Matrix& m, double tol) { return (m.adjoint() * m).approx(Matrix::identity(m.dim()), tol); }

StateVector StateVector::basis(std::size_t wires, std::size_t index) {
  StateVector s;
  s.amplitudes.assign(std::size_t{1} << wires, 0.0);
  s.amplitudes.at(index) = 1.0;
  return s;
}

std::size_t StateVector::wires() const {
  std::size_t w = 0;
  while ((std::size_t{1} << w) < amplitudes.size()) ++w;
  return w;
}

double StateVector::norm() const {
  double n = 0;
  for (const Complex& a : amplitudes) n += std::norm(a);
  return std::sqrt(n);
}

Complex StateVector::inner(const StateVector& o) const {
  Complex r = 0;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) r += std::conj(amplitudes[i]) * o.amplitudes[i];
  return r;
}

bool StateVector::approx(const StateVector& o, double tol) const {
  if (amplitudes.size() != o.amplitudes.size()) return false;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    if (std::abs(amplitudes[i] - o.amplitudes[i]) > tol) return false;
  }
  return true;
}

std::string StateVector::str() const {
  std::ostringstream o;
  const std::size_t w = wires();
  bool first = true;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const Complex a = amplitudes[i];
    if (std::abs(a) < 1e-12) continue;
    if (!first) o << " + ";
    first = false;
    o << "(" << fmt(a.real());
    if (std::abs(a.imag()) > 1e-12) o << (a.imag() < 0 ? "-" : "+") << fmt(std::abs(a.imag())) << "i";
    o << ")|";
    for (std::size_t b = 0; b < w; ++b) o << ((i >> (w - 1 - b)) & 1u);
    o << ">";
  }
  return first ? "0" : o.str();
}

Gate hadamard(std::size_t wire) {
  return Gate{Matrix(2, {kInvSqrt2, kInvSqrt2, kInvSqrt2, -kInvSqrt2}), {wire}};
}

Gate pauli_x(std::size_t wire) { return Gate{Matrix(2, {0.0, 1.0, 1.0, 0.0}), {wire}}; }

Gate cnot(std::size_t control, std::size_t target) {
  Matrix m(4);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  m(2, 3) = 1.0;
  m(3, 2) = 1.0;
  return Gate{m, {control, target}};
}

StateVector apply_operator(const StateVector& s, const Gate& g) {
  check_wires(s, g);
  const std::size_t w = s.wires();
  const std::size_t k = g.wires.size();
  auto sub_index = [&](std::size_t i) {
    std::size_t sub = 0;
    for (std::size_t j = 0; j < k; ++j) sub = (sub << 1) | ((i >> (w - 1 - g.wires[j])) & 1u);
    return sub;
  };
  auto with_sub = [&](std::size_t i, std::size_t sub) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t bit = w - 1 - g.wires[j];
      const std::size_t v = (sub >> (k - 1 - j)) & 1u;
      i = (i & ~(std::size_t{1} << bit)) | (v << bit);
    }
    return i;
  };
  StateVector out;
  out.amplitudes.assign(s.amplitudes.size(), 0.0);
  for (std::size_t i = 0; i < s.amplitudes.size(); ++i) {
    const std::size_t row = sub_index(i);
    for (std::size_t col = 0; col < g.matrix.dim(); ++col) out.amplitudes[i] += g.matrix(row, col) * s.amplitudes[with_sub(i, col)];
  }
  return out;
}

StateVector apply_gate(const StateVector& s, const Gate& g) {
  if (!is_unitary(g.matrix)) throw NonUnitary("gate matrix is not unitary");
  return apply_operator(s, g);
}

std::vector<Outcome> measure_outcome_distribution(const StateVector& s, const std::vector<Gate>& operators) {
  if (operators.empty()) throw IncompleteOperators("no measurement operators");
  const std::size_t dim = operators.front().matrix.dim();
  Matrix sum(dim);
  for (const Gate& m : operators) {
    if (m.matrix.dim() != dim || m.wires != operators.front().wires) {
      throw IncompleteOperators("measurement operators act on different wires");
    }
    sum = sum + m.matrix.adjoint() * m.matrix;
  }
  if (!sum.approx(Matrix::identity(dim))) throw IncompleteOperators("sum of M^dagger M is not the identity");
  std::vector<Outcome> out;
  for (const Gate& m : operators) {
    StateVector v = apply_operator(s, m);
    const double n = v.norm();
    Outcome o;
    o.probability = n * n;
    if (n > 1e-15) {
      for (Complex& a : v.amplitudes) a /= n;
      o.post = std::move(v);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Gate> computational_basis(std::size_t wire) {
  return {Gate{projector(1.0, 0.0), {wire}}, Gate{projector(0.0, 1.0), {wire}}};
}

std::vector<Gate> hadamard_basis(std::size_t wire) {
  return {Gate{projector(kInvSqrt2, kInvSqrt2), {wire}}, Gate{projector(kInvSqrt2, -kInvSqrt2), {wire}}};
}

StateVector bell_circuit(std::size_t input) {
  if (input > 3) throw std::invalid_argument("bell circuit input must be a two-qubit basis state");
  return apply_gate(apply_gate(StateVector::basis(2, input), hadamard(0)), cnot(0, 1));
}

bool Report::passed() const {
  for (const Check& c : checks) {
    if (!c.passed) return false;
  }
  return !checks.empty();
}

std::string Report::str() const {
  std::ostringstream o;
  for (const Check& c : checks) o << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return o.str();
}

Report symbolic_semantics_report() {
  Report r;
  auto encode = [](int bit, bool diagonal) {
    StateVector s = StateVector::basis(1, static_cast<std::size_t>(bit));
    return diagonal ? apply_gate(s, hadamard(0)) : s;
  };
  auto basis = [](bool diagonal) { return diagonal ? hadamard_basis(0) : computational_basis(0); };

  {
    Check c{"matching basis is deterministic", true, ""};
    for (bool diagonal : {false, true}) {
      for (int bit : {0, 1}) {
        auto dist = measure_outcome_distribution(encode(bit, diagonal), basis(diagonal));
        const double p = dist[static_cast<std::size_t>(bit)].probability;
        if (std::abs(p - 1.0) > kTolerance) c.passed = false;
        c.detail += std::string(diagonal ? "[x]" : "[+]") + " bit " + std::to_string(bit) + " -> p=" + fmt(p) + "; ";
      }
    }
    r.checks.push_back(c);
  }
  {
    Check c{"wrong basis gives 1/2-1/2", true, ""};
    for (bool diagonal : {false, true}) {
      for (int bit : {0, 1}) {
        auto dist = measure_outcome_distribution(encode(bit, diagonal), basis(!diagonal));
        for (const Outcome& o : dist) {
          if (std::abs(o.probability - 0.5) > kTolerance) c.passed = false;
        }
        c.detail += std::string(diagonal ? "[x]" : "[+]") + " bit " + std::to_string(bit) + " -> (" +
                    fmt(dist[0].probability) + "," + fmt(dist[1].probability) + "); ";
      }
    }
    r.checks.push_back(c);
  }
  {
    Check c{"EPR halves are anti-correlated", true, ""};
    const StateVector pair = bell_circuit(3);
    for (bool diagonal : {false, true}) {
      std::vector<Gate> first = diagonal ? hadamard_basis(0) : computational_basis(0);
      std::vector<Gate> second = diagonal ? hadamard_basis(1) : computational_basis(1);
      auto dist = measure_outcome_distribution(pair, first);
      for (std::size_t m = 0; m < 2; ++m) {
        if (std::abs(dist[m].probability - 0.5) > kTolerance) c.passed = false;
        auto then = measure_outcome_distribution(dist[m].post, second);
        const double opposite = then[1 - m].probability;
        if (std::abs(opposite - 1.0) > kTolerance) c.passed = false;
        c.detail += std::string(diagonal ? "[x]" : "[+]") + " first " + std::to_string(m) + " -> p(opposite)=" + fmt(opposite) + "; ";
      }
    }
    r.checks.push_back(c);
  }
  return r;
}

Report validate_symbolic_semantics() {
  Report r = symbolic_semantics_report();
  for (const Check& c : r.checks) {
    if (!c.passed) throw ValidationFailure("check failed: " + c.name + " (" + c.detail + ")");
  }
  return r;
}

}  // namespace qdy::oracle
