#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "nvreg/engine.hpp"
#include "nvreg/parallel.hpp"

namespace nvreg {

struct ScanPoint {
  double x = 0;       // scan coordinate (omega_DD in rad/s, or phi_RF in rad)
  double signal = 0;  // electron population returned to the reference state
};

namespace detail {

// Population of the electron reference state after u, starting from
// |psi0><psi0| (x) 1/d on the nuclei.
inline double electron_return(const Matrix& u, const Vector& psi0, const Vector& ref) {
  const Eigen::Index d = u.rows() / 2;
  const Matrix id = Matrix::Identity(d, d);
  const Matrix in = kron(Matrix(psi0), id);
  const Matrix out = kron(Matrix(ref.adjoint()), id) * u * in;
  return out.squaredNorm() / double(d);
}

inline SpinRegister electron_only(const SpinRegister& reg) {
  return build_register({}, reg.b_field(), reg.ms(), {.gamma_n = reg.gamma_n()});
}

}  // namespace detail

// ---------------------------------------------------------------- DEE spectrum

struct DeeParams {
  double interaction_time = 17.6e-6;  // per interaction block
  double delay_time = 673e-6;
  int delay_pulses = 200;             // AXY-8, decoupling only
  int harmonic = 1;
  std::optional<PulseErrorModel> errors;
  unsigned workers = 0;
};

// XY8 interaction block at omega_dd, delayed AXY-8 window with f = 0, second
// interaction block, closing pi/2. Electron starts in |0>, nuclei maximally
// mixed. The signal is the population of the state the electron would reach
// with no nuclei present, so an empty register reads 1.
// The interaction block pulse count is fixed from the grid's mean frequency.
inline std::vector<ScanPoint> dee_spectrum(const SpinRegister& reg, const std::vector<double>& omega_dd_grid,
                                           const DeeParams& p = {}) {
  if (omega_dd_grid.empty()) return {};
  if (!(p.interaction_time > 0) || !(p.delay_time > 0)) throw Error(Errc::invalid_argument, "scan times must be positive");
  double mean = 0;
  for (double w : omega_dd_grid) {
    if (!(w > 0)) throw Error(Errc::invalid_argument, "omega_dd grid must be positive");
    mean += w / omega_dd_grid.size();
  }
  const int n_int = 8 * std::max(1, static_cast<int>(std::lround(p.interaction_time * mean / (8 * pi))));
  const PulseSequence delay_base =
      build_sequence(Family::AXY8, 1, two_pi * (p.delay_pulses / 10) / p.delay_time, 0.0, p.delay_pulses);
  const SpinRegister bare = detail::electron_only(reg);

  auto point = [&](std::size_t i) {
    const double w = omega_dd_grid[i];
    PulseSequence a = build_sequence(Family::XY8, p.harmonic, p.harmonic * w, 0.0, n_int);
    PulseSequence dl = delay_base;
    if (p.errors) a = apply_errors(a, *p.errors), dl = apply_errors(dl, *p.errors);
    auto compose = [&](const SpinRegister& r) {
      LabEngine eng(r);
      const Matrix ua = eng.run(a);
      return Matrix(ua * eng.run(dl) * ua);
    };
    LabEngine e0(bare);
    const Matrix open = e0.electron_rotation(pi / 2, 0);
    const Vector psi0 = open.col(0);
    const Vector ref = compose(bare) * psi0;
    const Matrix u = compose(reg);
    return ScanPoint{w, detail::electron_return(u, psi0, ref)};
  };
  return parallel_map<ScanPoint>(omega_dd_grid.size(), point, p.workers);
}

// ---------------------------------------------------------------- polar scan

struct PolarParams {
  int pulses = 1000;  // elementary AXY-8 pulses
  double rf_rabi = kHz2pi(2);
  std::optional<PulseErrorModel> errors;
  unsigned workers = 0;
};

// AXY-8 at the first harmonic of nucleus 1's Larmor frequency with coefficient
// f1 and a continuous resonant RF drive of phase phi_RF over the whole
// sequence. Electron starts in |x+>, nuclei maximally mixed.
inline std::vector<ScanPoint> polar_position_scan(const SpinRegister& reg, const std::vector<double>& phi_rf_grid,
                                                  double f1, const PolarParams& p = {}) {
  if (reg.size() == 0) throw Error(Errc::empty_register, "polar scan needs a nucleus");
  const double w1 = reg.nucleus(1).larmor;
  PulseSequence seq = build_sequence(Family::AXY8, 1, w1, f1, p.pulses);
  if (p.errors) seq = apply_errors(seq, *p.errors);
  const SpinRegister bare = detail::electron_only(reg);
  LabEngine e0(bare);
  const Vector psi0 = e0.electron_rotation(pi / 2, 0).col(0);
  const Vector ref = e0.run(seq) * psi0;

  auto point = [&](std::size_t i) {
    LabEngine eng(reg);
    const RfDrive rf{p.rf_rabi, phi_rf_grid[i], w1, 0, seq.total_time};
    return ScanPoint{phi_rf_grid[i], detail::electron_return(eng.run(seq, 0, &rf), psi0, ref)};
  };
  return parallel_map<ScanPoint>(phi_rf_grid.size(), point, p.workers);
}

// Rotating-frame model of the polar scan: per electron branch each nucleus
// feels b = +-(f1 A_perp / 4) e(phi_j) + rabi e(phi_RF); the returned
// population is (1 + prod_j c_j) / 2 with c_j the branch overlap.
inline double polar_model(const std::vector<double>& azimuths, double phi_rf, double f1, double a_perp, double rabi,
                          double duration) {
  double c = 1;
  const double g = f1 * a_perp / 4;
  for (double phi : azimuths) {
    const double px = g * std::cos(phi), py = g * std::sin(phi);
    const double rx = rabi * std::cos(phi_rf), ry = rabi * std::sin(phi_rf);
    const double ax = rx + px, ay = ry + py, bx = rx - px, by = ry - py;
    const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
    const double xa = 0.5 * duration * na, xb = 0.5 * duration * nb;
    const double dot = na > 0 && nb > 0 ? (ax * bx + ay * by) / (na * nb) : 1;
    c *= std::cos(xa) * std::cos(xb) + dot * std::sin(xa) * std::sin(xb);
  }
  return 0.5 * (1 + c);
}

struct AzimuthFit {
  std::vector<double> azimuths;  // mod pi, in [0, pi)
  double rms_residual = 0;
};

// Least-squares fit of the model's azimuths (one per nucleus, up to two) to a
// measured scan: 1 degree grid over [0, 2pi) per azimuth, then pattern search.
inline AzimuthFit fit_polar_azimuths(const std::vector<ScanPoint>& scan, int nuclei, double f1, double a_perp,
                                     double rabi, double duration) {
  if (nuclei < 1 || nuclei > 2) throw Error(Errc::invalid_argument, "azimuth fit supports one or two nuclei");
  if (scan.empty()) throw Error(Errc::invalid_argument, "empty scan");
  auto cost = [&](const std::vector<double>& az) {
    double s = 0;
    for (const auto& q : scan) s += std::pow(polar_model(az, q.x, f1, a_perp, rabi, duration) - q.signal, 2);
    return s;
  };
  const int steps = 360;
  const double h = two_pi / steps;
  std::vector<double> best(nuclei, 0.0);
  double best_cost = std::numeric_limits<double>::infinity();
  if (nuclei == 1) {
    for (int i = 0; i < steps; ++i) {
      const double c = cost({i * h});
      if (c < best_cost) best_cost = c, best = {i * h};
    }
  } else {
    for (int i = 0; i < steps; ++i)
      for (int j = i; j < steps; ++j) {
        const double c = cost({i * h, j * h});
        if (c < best_cost) best_cost = c, best = {i * h, j * h};
      }
  }
  for (double step = h / 2; step > 1e-7; step /= 2) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (int k = 0; k < nuclei; ++k)
        for (double dir : {-1.0, 1.0}) {
          auto trial = best;
          trial[k] += dir * step;
          const double c = cost(trial);
          if (c < best_cost) best_cost = c, best = trial, moved = true;
        }
    }
  }
  AzimuthFit fit;
  for (double a : best) {
    double m = std::fmod(a, pi);
    fit.azimuths.push_back(m < 0 ? m + pi : m);
  }
  std::sort(fit.azimuths.begin(), fit.azimuths.end());
  fit.rms_residual = std::sqrt(best_cost / scan.size());
  return fit;
}

// Smallest distance between two angles modulo pi.
inline double angle_distance_mod_pi(double a, double b) {
  double d = std::fmod(std::abs(a - b), pi);
  return std::min(d, pi - d);
}

// Local minima of a periodic scan (the grid is assumed to cover one period).
inline std::vector<ScanPoint> scan_minima(const std::vector<ScanPoint>& scan) {
  std::vector<ScanPoint> out;
  const std::size_t n = scan.size();
  if (n < 3) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = scan[(i + n - 1) % n].signal, c = scan[i].signal, r = scan[(i + 1) % n].signal;
    if (c < l && c <= r) out.push_back(scan[i]);
  }
  return out;
}

inline double scan_contrast(const std::vector<ScanPoint>& scan) {
  if (scan.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(scan.begin(), scan.end(),
                                            [](const ScanPoint& a, const ScanPoint& b) { return a.signal < b.signal; });
  return hi->signal - lo->signal;
}

}  // namespace nvreg
