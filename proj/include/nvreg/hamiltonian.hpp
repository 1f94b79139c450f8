#pragma once

#include <vector>

#include "nvreg/lattice.hpp"
#include "nvreg/spin.hpp"

namespace nvreg {

struct HamiltonianOptions {
  bool transverse = true;  // A_perp terms
  bool dipolar = true;     // nuclear-nuclear secular dipolar terms (needs positions)
};

// Operator on nucleus j (1-based) within the nuclear space of N spins.
inline Matrix nuclear_operator(const SpinRegister& reg, int j, const Matrix& op2) {
  return embed(op2, j - 1, reg.size());
}

inline Matrix nuclear_dipolar(const SpinRegister& reg) {
  const int n = reg.size();
  const Eigen::Index d = Eigen::Index{1} << n;
  Matrix h = Matrix::Zero(d, d);
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b) {
      const auto& na = reg.nucleus(a);
      const auto& nb = reg.nucleus(b);
      if (!na.position || !nb.position) continue;
      const double g = dipolar_coupling(*na.position, *nb.position);
      const Matrix zz = nuclear_operator(reg, a, 0.5 * pauli::z()) * nuclear_operator(reg, b, 0.5 * pauli::z());
      const Matrix xx = nuclear_operator(reg, a, 0.5 * pauli::x()) * nuclear_operator(reg, b, 0.5 * pauli::x());
      const Matrix yy = nuclear_operator(reg, a, 0.5 * pauli::y()) * nuclear_operator(reg, b, 0.5 * pauli::y());
      h += g * (zz - 0.5 * (xx + yy));
    }
  return h;
}

// Lab-frame nuclear Hamiltonian with the electron in level `level`:
//   s/2 sum_j (A_par I_j^z + A_perp I_j^{phi_j}) - sum_j omega_j I_j^z + H_nn
inline Matrix nuclear_block(const SpinRegister& reg, int level, const HamiltonianOptions& opt = {}) {
  const int n = reg.size();
  const Eigen::Index d = Eigen::Index{1} << n;
  const double s = electron_sign(reg.ms(), level);
  Matrix h = Matrix::Zero(d, d);
  for (int j = 1; j <= n; ++j) {
    const auto& nu = reg.nucleus(j);
    h += nuclear_operator(reg, j, (0.5 * s * nu.hyperfine.a_par - nu.larmor) * 0.5 * pauli::z());
    if (opt.transverse)
      h += nuclear_operator(reg, j, 0.5 * s * nu.hyperfine.a_perp * spin_half_transverse(nu.hyperfine.azimuth));
  }
  if (opt.dipolar && n >= 2) h += nuclear_dipolar(reg);
  return h;
}

inline Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix r = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  r.topLeftCorner(a.rows(), a.cols()) = a;
  r.bottomRightCorner(b.rows(), b.cols()) = b;
  return r;
}

inline Matrix lab_hamiltonian(const SpinRegister& reg, const HamiltonianOptions& opt = {}) {
  return block_diag(nuclear_block(reg, 0, opt), nuclear_block(reg, 1, opt));
}

// Default rotating-frame frequencies: each nucleus at its own omega_j.
inline std::vector<double> default_frame(const SpinRegister& reg) {
  std::vector<double> w;
  for (const auto& n : reg.nuclei()) w.push_back(n.larmor);
  return w;
}

// Diagonal of exp(-i t sum_j w_j I_j^z) over the nuclear space; the rotating
// frame propagator is U_rot(t) = exp(-i t sum w I^z) U_lab(t) since H_0 = -sum w I^z.
inline Vector frame_phases(const SpinRegister& reg, const std::vector<double>& w, double t) {
  const int n = reg.size();
  const Eigen::Index d = Eigen::Index{1} << n;
  Vector ph(d);
  for (Eigen::Index idx = 0; idx < d; ++idx) {
    double e = 0;
    for (int j = 0; j < n; ++j) e += w[j] * (((idx >> (n - 1 - j)) & 1) ? -0.5 : 0.5);
    ph(idx) = std::exp(-I_unit * (e * t));
  }
  return ph;
}

inline Matrix to_rotating_frame(const Matrix& u_lab, const SpinRegister& reg, const std::vector<double>& w, double t) {
  const Vector ph = frame_phases(reg, w, t);
  Vector full(2 * ph.size());
  full << ph, ph;
  return full.asDiagonal() * u_lab;
}

// Control-free Hamiltonian in the rotating frame with offset delta:
//   1/2 sigma_z sum_j A_par,j I_j^z + delta sum_j I_j^z
inline Matrix free_hamiltonian(const SpinRegister& reg, double delta) {
  Matrix h = Matrix::Zero(reg.dim(), reg.dim());
  const Matrix sz = site_operator(reg, Site::electron(), Axis::Z());
  for (int j = 1; j <= reg.size(); ++j) {
    const Matrix iz = site_operator(reg, Site::nucleus(j), Axis::Z());
    h += 0.5 * reg.nucleus(j).hyperfine.a_par * sz * iz + delta * iz;
  }
  return h;
}

}  // namespace nvreg
