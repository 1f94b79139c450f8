#pragma once

#include <cmath>
#include <vector>

#include "nvreg/evolution.hpp"
#include "nvreg/hamiltonian.hpp"

namespace nvreg {

struct SelectiveGatePlan {
  double phi1 = 0, phi2 = 0;  // target / partner azimuths
  double alpha = 0;
  double theta = 0;
  double beta = 0;
  int reps = 0;
  double chi = 0, xi = 0, mu_theta = 0;
  double r_x = 0, r_y = 0;
  int target = 1;  // nucleus rotated by R_pi (1 or 2)
  bool solved = false;
};

// cos(n chi) written as a polynomial in xi = cos chi (multiple-angle formula).
inline double multiple_angle_cos(int n, double xi) {
  const double s2 = 1 - xi * xi;
  double sum = 0, binom = 1;  // C(n, 2k)
  for (int k = 0; 2 * k <= n; ++k) {
    if (k > 0) binom *= double(n - 2 * k + 2) * (n - 2 * k + 1) / ((2 * k - 1) * (2 * k));
    sum += (k % 2 ? -1 : 1) * binom * std::pow(xi, n - 2 * k) * std::pow(s2, k);
  }
  return sum;
}

// Largest root of cos(n chi) = 0 in xi, by downward scan and bisection.
inline double largest_multiple_angle_root(int n) {
  const double step = 1e-4;
  double hi = 1, fhi = multiple_angle_cos(n, hi);
  for (double lo = 1 - step; lo >= -1 - 1e-12; lo -= step) {
    const double flo = multiple_angle_cos(n, lo);
    if (flo == 0) return lo;
    if ((flo < 0) != (fhi < 0)) {
      double a = lo, b = hi, fa = flo;
      for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
        const double m = 0.5 * (a + b), fm = multiple_angle_cos(n, m);
        if ((fm < 0) == (fa < 0)) a = m, fa = fm; else b = m;
      }
      return 0.5 * (a + b);
    }
    hi = lo, fhi = flo;
  }
  return -1;
}

// Smallest folded |phi2 - phi1| admitting cos(n chi) = 0 for some theta.
// xi = 1 - mu sin^2(dphi) with mu in [0, 2] reaches down to 1 - 2 sin^2(dphi).
inline double min_angle(int n) {
  if (n < 1) throw Error(Errc::invalid_argument, "repetitions must be >= 1");
  if (n == 1) return pi / 4;
  const double xi = largest_multiple_angle_root(n);
  return std::asin(std::sqrt(std::max(0.0, (1 - xi) / 2)));
}

// |phi2 - phi1| reduced mod pi and folded into [0, pi/2].
inline double folded_angle(double dphi) {
  double d = std::fmod(std::abs(dphi), pi);
  return d > pi / 2 ? pi - d : d;
}

// Coefficients of U_DEE^2 = -2i (r_x I^alpha + r_y I^{alpha+pi/2}) sigma_z + c.
inline void dee_coefficients(double theta, double alpha, double& rx, double& ry, double& c) {
  const double ca = std::cos(alpha), sa = std::sin(alpha), st = std::sin(theta), ct = std::cos(theta);
  rx = 2 * ca * st * (ca * ca * ct + sa * sa);
  ry = 4 * ca * ca * sa * st * std::pow(std::sin(theta / 2), 2);
  c = ct * ct - std::cos(2 * alpha) * st * st;
}

namespace detail {
inline void fill_plan_scalars(SelectiveGatePlan& p) {
  const double s2 = std::pow(std::sin(p.phi2 - p.phi1), 2);
  p.mu_theta = 1 - std::cos(2 * p.theta);
  p.xi = 1 - p.mu_theta * s2;
  p.chi = std::acos(std::clamp(p.xi, -1.0, 1.0));
  double c;
  dee_coefficients(p.theta, p.alpha, p.r_x, p.r_y, c);
}
}  // namespace detail

// Plan for given azimuths; phi1 is the target's. Smallest n <= max_reps wins.
inline SelectiveGatePlan plan_selective_pi(double phi1, double phi2, int max_reps, int target = 1) {
  if (max_reps < 1) throw Error(Errc::invalid_argument, "max_reps must be >= 1");
  SelectiveGatePlan p;
  p.phi1 = phi1;
  p.phi2 = phi2;
  p.target = target;
  p.alpha = phi2 - phi1 + pi / 2;
  const double d = folded_angle(phi2 - phi1);
  const double s2 = std::pow(std::sin(d), 2);
  if (d < min_angle(max_reps) - 1e-12)
    throw Error(Errc::unsolvable, "azimuth difference " + std::to_string(d) + " rad below min_angle(" +
                                      std::to_string(max_reps) + ") = " + std::to_string(min_angle(max_reps)));
  for (int n = 1; n <= max_reps; ++n) {
    const double xi_star = n == 1 ? 0.0 : largest_multiple_angle_root(n);
    const double need = (1 - xi_star) / 2;  // required sin^2(dphi)
    if (s2 < need - 1e-12) continue;
    // mu = (1 - xi*) / s2, sin^2 theta = mu / 2; then Newton polish of cos(n chi(theta)) = 0.
    double sin2 = std::min(1.0, (1 - xi_star) / (2 * s2));
    double theta = std::asin(std::sqrt(sin2));
    auto g = [&](double th) {
      const double xi = 1 - (1 - std::cos(2 * th)) * s2;
      return std::cos(n * std::acos(std::clamp(xi, -1.0, 1.0)));
    };
    for (int it = 0; it < 50 && std::abs(g(theta)) > 1e-14 && theta < pi / 2 - 1e-9; ++it) {
      const double h = 1e-7;
      const double dg = (g(theta + h) - g(theta - h)) / (2 * h);
      if (dg == 0) break;
      theta = std::min(pi / 2, theta - g(theta) / dg);
    }
    p.theta = theta;
    p.reps = n;
    detail::fill_plan_scalars(p);
    p.solved = true;
    break;
  }
  if (!p.solved) throw Error(Errc::unsolvable, "no repetition count admits a solution");
  return p;
}

// Plan for the register's pair, targeting nucleus `target`.
inline SelectiveGatePlan plan_for_register(const SpinRegister& reg, int max_reps, int target = 1) {
  if (!reg.has_pair()) throw Error(Errc::no_pair_designated, "register has no Larmor pair");
  const double a = reg.nucleus(target).hyperfine.azimuth, b = reg.nucleus(3 - target).hyperfine.azimuth;
  return plan_selective_pi(a, b, max_reps, target);
}

// ---------------------------------------------------------------- ideal constituents

// U_pi = exp(i pi I_partner^y) exp(i pi I_target^alpha), local frames.
inline Matrix u_pi_ideal(const SpinRegister& reg, const SelectiveGatePlan& p) {
  const int t = p.target, o = 3 - t;
  return expm_hermitian(site_operator(reg, Site::nucleus(o), Axis::Y()), -pi) *
         expm_hermitian(site_operator(reg, Site::nucleus(t), Axis::at(p.alpha)), -pi);
}

inline Matrix u_dee_ideal(const SpinRegister& reg, const SelectiveGatePlan& p) {
  const Matrix ui = expm_hermitian(pair_interaction_generator(reg), p.theta);
  return ui * u_pi_ideal(reg, p) * ui;
}

// sigma_z U_DEE^{2n}
inline Matrix r_pi_ideal(const SelectiveGatePlan& p, const SpinRegister& reg) {
  if (!p.solved) throw Error(Errc::plan_unsolved, "plan not solved");
  const Matrix sz = site_operator(reg, Site::electron(), Axis::Z());
  return sz * matrix_power(u_dee_ideal(reg, p), 2 * p.reps);
}

// Azimuth beta of a pi rotation proportional to (cos b sx + sin b sy) on nucleus j
// (local frame), read from traces; defined mod pi.
inline double rotation_azimuth(const SpinRegister& reg, const Matrix& r, int j) {
  const cplx tx = (r * site_operator(reg, Site::nucleus(j), Axis::X())).trace();
  const cplx ty = (r * site_operator(reg, Site::nucleus(j), Axis::Y())).trace();
  const cplx ref = std::abs(tx) >= std::abs(ty) ? tx : ty;
  const cplx g = ref / std::abs(ref);
  double b = std::atan2((ty / g).real(), (tx / g).real());
  return b < 0 ? b + two_pi : b;
}

// Fill beta from the ideal product; consistency with the closed form is
// checked by the tests.
inline SelectiveGatePlan with_beta(SelectiveGatePlan p, const SpinRegister& reg) {
  p.beta = rotation_azimuth(reg, r_pi_ideal(p, reg), p.target);
  return p;
}

// Same plan with the interaction angle replaced (e.g. -theta to match the
// reachable sign of f_k); beta recomputed.
inline SelectiveGatePlan with_theta(SelectiveGatePlan p, double theta, const SpinRegister& reg) {
  p.theta = theta;
  detail::fill_plan_scalars(p);
  return with_beta(p, reg);
}

// exp(-i pi I_j^b)
inline Matrix pi_rotation(const SpinRegister& reg, int j, double b) {
  return expm_hermitian(site_operator(reg, Site::nucleus(j), Axis::at(b)), pi);
}

// Rotate R_pi's axis by psi via a collective z rotation of the pair (frame delay).
inline Matrix shift_azimuth(const SpinRegister& reg, const Matrix& r, double psi) {
  Matrix jz = site_operator(reg, Site::nucleus(1), Axis::Z()) + site_operator(reg, Site::nucleus(2), Axis::Z());
  const Matrix z = expm_hermitian(jz, psi);
  return z * r * z.adjoint();
}

// exp(i phi I_target^z) up to global phase, as R_pi(b1) R_pi(b2) with b2 - b1 + 2 pi = phi / 2.
inline Matrix z_rotation(const SpinRegister& reg, double phi, const SelectiveGatePlan& plan) {
  const Matrix r = r_pi_ideal(plan, reg);
  return r * shift_azimuth(reg, r, phi / 2 - two_pi);
}

// (i sx) R_pi exp(-i H_free tau) (i sx) R_pi exp(-i H_free tau)
inline Matrix u_ent_prime(const SpinRegister& reg, double tau, double delta, const SelectiveGatePlan& plan) {
  if (!(tau > 0)) throw Error(Errc::invalid_argument, "tau must be positive");
  const Matrix r = r_pi_ideal(plan, reg);
  const Matrix isx = I_unit * site_operator(reg, Site::electron(), Axis::X());
  const Matrix f = expm_hermitian(free_hamiltonian(reg, delta), tau);
  const Matrix block = isx * r * f;
  return block * block;
}

// exp[-i tau A_par,t sigma_z I_t^z] exp[-i 2 tau delta I_o^z] on the pair.
inline Matrix u_z_target(const SpinRegister& reg, double tau, double delta, int target = 1) {
  const Matrix sz = site_operator(reg, Site::electron(), Axis::Z());
  const int o = 3 - target;
  return expm_hermitian(reg.nucleus(target).hyperfine.a_par * sz * site_operator(reg, Site::nucleus(target), Axis::Z()), tau) *
         expm_hermitian(site_operator(reg, Site::nucleus(o), Axis::Z()), 2 * tau * delta);
}

}  // namespace nvreg
