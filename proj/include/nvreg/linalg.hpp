#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "nvreg/error.hpp"

namespace nvreg {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Real3 = Eigen::Vector3d;

inline constexpr cplx I_unit{0.0, 1.0};

// Single-qubit building blocks (standard Pauli basis, index 0 = first level).
namespace pauli {
inline Matrix id() { return Matrix::Identity(2, 2); }
inline Matrix x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix y() { Matrix m(2, 2); m << 0, -I_unit, I_unit, 0; return m; }
inline Matrix z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }
}  // namespace pauli

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector r(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) r.segment(i * b.size(), b.size()) = a(i) * b;
  return r;
}

// Embed a one-qubit operator on qubit `q` of `n` (qubit 0 most significant).
inline Matrix embed(const Matrix& op, int q, int n) {
  Matrix r = Matrix::Identity(1, 1);
  for (int k = 0; k < n; ++k) r = kron(r, k == q ? op : pauli::id());
  return r;
}

inline double hermiticity_defect(const Matrix& h) { return (h - h.adjoint()).cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Matrix& h, double tol = 1e-9) {
  if (h.rows() != h.cols()) return false;
  if (h.size() == 0) return true;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  return hermiticity_defect(h) <= tol * scale;
}

inline double unitarity_defect(const Matrix& u) {
  if (u.size() == 0) return 0;
  return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

// Spectral decomposition of a Hermitian generator, reused for many durations.
struct Spectral {
  Matrix vecs;
  Eigen::VectorXd vals;

  explicit Spectral(const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    vecs = es.eigenvectors();
    vals = es.eigenvalues();
  }
  Spectral() = default;

  // exp(-i H t)
  Matrix evolve(double t) const {
    Vector ph(vals.size());
    for (Eigen::Index k = 0; k < vals.size(); ++k) ph(k) = std::exp(-I_unit * (vals(k) * t));
    return vecs * ph.asDiagonal() * vecs.adjoint();
  }
};

inline Matrix expm_hermitian(const Matrix& h, double t) {
  if (h.size() == 0) return h;
  return Spectral(h).evolve(t);
}

// Repeated squaring; p >= 0.
inline Matrix matrix_power(const Matrix& u, long long p) {
  Matrix result = Matrix::Identity(u.rows(), u.cols());
  Matrix base = u;
  while (p > 0) {
    if (p & 1) result = base * result;
    p >>= 1;
    if (p) base = base * base;
  }
  return result;
}

inline double trace_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

// F = |Tr(U_ideal U^dagger)| / Tr(U U^dagger)
inline double gate_fidelity(const Matrix& actual, const Matrix& ideal) {
  if (actual.rows() != ideal.rows() || actual.cols() != ideal.cols() || actual.rows() != actual.cols())
    throw Error(Errc::dimension_mismatch, "gate_fidelity operands differ in shape");
  const double norm = (actual * actual.adjoint()).trace().real();
  if (norm <= 0) return 0;
  return std::abs((ideal * actual.adjoint()).trace()) / norm;
}

// Full-register index from the bits of a qubit subset and its complement.
// `sys` lists system qubits (in the order used by the system operator).
struct QubitSplit {
  int n;
  std::vector<int> sys, env;

  QubitSplit(int n_qubits, std::vector<int> system) : n(n_qubits), sys(std::move(system)) {
    for (int q = 0; q < n; ++q) {
      bool in_sys = false;
      for (int s : sys) in_sys |= (s == q);
      if (!in_sys) env.push_back(q);
    }
  }
  int dim_sys() const { return 1 << sys.size(); }
  int dim_env() const { return 1 << env.size(); }
  Eigen::Index index(int s, int e) const {
    Eigen::Index idx = 0;
    const int ns = static_cast<int>(sys.size()), ne = static_cast<int>(env.size());
    for (int k = 0; k < ns; ++k)
      if ((s >> (ns - 1 - k)) & 1) idx |= Eigen::Index{1} << (n - 1 - sys[k]);
    for (int k = 0; k < ne; ++k)
      if ((e >> (ne - 1 - k)) & 1) idx |= Eigen::Index{1} << (n - 1 - env[k]);
    return idx;
  }
};

// M = Tr_sys[(U_sys^dagger (x) 1) U], an operator on the environment.
inline Matrix environment_overlap(const Matrix& u, const Matrix& u_sys, const QubitSplit& split) {
  const int ds = split.dim_sys(), de = split.dim_env();
  if (u.rows() != Eigen::Index{ds} * de || u_sys.rows() != ds)
    throw Error(Errc::dimension_mismatch, "subsystem fidelity dimensions");
  Matrix m = Matrix::Zero(de, de);
  for (int s = 0; s < ds; ++s)
    for (int s2 = 0; s2 < ds; ++s2) {
      const cplx w = std::conj(u_sys(s2, s));
      if (w == cplx{0, 0}) continue;
      for (int b = 0; b < de; ++b)
        for (int b2 = 0; b2 < de; ++b2) m(b, b2) += w * u(split.index(s2, b), split.index(s, b2));
    }
  return m;
}

// Gate fidelity on a subsystem with the complementary unitary chosen optimally:
// max_V |Tr((U_sys (x) V) U^dagger)| / Tr(U U^dagger).
inline double subsystem_fidelity(const Matrix& u, const Matrix& u_sys, const QubitSplit& split) {
  const double norm = (u * u.adjoint()).trace().real();
  return trace_norm(environment_overlap(u, u_sys, split)) / norm;
}

// Reduced density matrix of a pure state on the listed qubits.
inline Matrix reduced_density(const Vector& psi, int n_qubits, const std::vector<int>& keep) {
  QubitSplit split(n_qubits, keep);
  const int ds = split.dim_sys(), de = split.dim_env();
  Matrix rho = Matrix::Zero(ds, ds);
  for (int e = 0; e < de; ++e)
    for (int a = 0; a < ds; ++a)
      for (int b = 0; b < ds; ++b) rho(a, b) += psi(split.index(a, e)) * std::conj(psi(split.index(b, e)));
  return rho;
}

// |<a|b>|^2 for normalized vectors.
inline double state_fidelity(const Vector& a, const Vector& b) { return std::norm(a.dot(b)); }

inline double state_fidelity(const Matrix& rho, const Vector& psi) { return (psi.adjoint() * rho * psi)(0, 0).real(); }

}  // namespace nvreg
