#pragma once

#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nvreg/constants.hpp"
#include "nvreg/spin.hpp"

namespace nvreg {

enum class Family { CPMG, XY8, AXY8, custom };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::CPMG: return "CPMG";
    case Family::XY8: return "XY8";
    case Family::AXY8: return "AXY8";
    case Family::custom: return "custom";
  }
  return "?";
}

struct Pulse {
  double time = 0;      // centre, s
  double phase = 0;     // rotation axis azimuth, rad
  double duration = 0;  // 0 = instantaneous
};

struct PulseErrorModel {
  double amplitude_frac = 0;
  double detuning = 0;        // rad/s
  double pulse_duration = 0;  // s
  double rabi = 0;            // rad/s

  static PulseErrorModel with_rabi(double rabi, double amplitude_frac = 0, double detuning = 0) {
    if (!(rabi > 0)) throw Error(Errc::invalid_argument, "rabi must be positive");
    return {amplitude_frac, detuning, pi / rabi, rabi};
  }
  double angle() const { return pi * (1 + amplitude_frac); }
};

struct PulseSequence {
  Family family = Family::CPMG;
  std::vector<Pulse> pulses;
  double omega_dd = 0;
  int k_dd = 1;
  double f_k_target = 0;
  double total_time = 0;
  bool composite = false;
  // Repetition structure: pulses[i + unit_pulses] = pulses[i] shifted by unit_duration.
  int unit_pulses = 0;
  double unit_duration = 0;
  double x1 = 0, x2 = 0;  // composite timing (fraction of a period), AXY only
  std::optional<PulseErrorModel> errors;

  double period() const { return two_pi / omega_dd; }
  int units() const { return unit_pulses ? static_cast<int>(pulses.size()) / unit_pulses : 0; }
};

inline constexpr std::array<double, 8> xy8_phases{0, pi / 2, 0, pi / 2, pi / 2, 0, pi / 2, 0};
inline constexpr std::array<double, 5> knill_phases{pi / 6, 0, pi / 2, 0, pi / 6};

// ---------------------------------------------------------------- modulation function

// Fourier cosine coefficient of a +-1 function that flips at the sorted
// `flips` (in [0, period)) and starts at +1.
inline double cosine_coefficient(const std::vector<double>& flips, double period, int k) {
  const double w = two_pi * k / period;
  double sum = 0, sign = 1, a = 0;
  auto piece = [&](double t0, double t1) { sum += sign * (std::sin(w * t1) - std::sin(w * t0)) / w; };
  for (double t : flips) {
    piece(a, t);
    a = t;
    sign = -sign;
  }
  piece(a, period);
  return 2 * sum / period;
}

// Flip times of F(t) within the first period.
inline std::vector<double> first_period_flips(const PulseSequence& seq) {
  const double T = seq.period();
  std::vector<double> flips;
  for (const auto& p : seq.pulses)
    if (p.time < T * (1 - 1e-12)) flips.push_back(p.time);
  return flips;
}

inline std::vector<double> modulation_coefficients(const PulseSequence& seq, int k_max) {
  const auto flips = first_period_flips(seq);
  std::vector<double> f(k_max);
  for (int k = 1; k <= k_max; ++k) f[k - 1] = cosine_coefficient(flips, seq.period(), k);
  return f;
}

// F(t) = (-1)^{n(t)}
inline int modulation_sign(const PulseSequence& seq, double t) {
  int n = 0;
  for (const auto& p : seq.pulses)
    if (p.time < t) ++n;
  return n % 2 ? -1 : 1;
}

// ---------------------------------------------------------------- AXY timing

// Normalized flip positions of one AXY period (two composites).
inline std::vector<double> axy_period_positions(double x1, double x2) {
  return {x1, x2, 0.25, 0.5 - x2, 0.5 - x1, 0.5 + x1, 0.5 + x2, 0.75, 1 - x2, 1 - x1};
}

inline double axy_coefficient(double x1, double x2, int k) {
  std::vector<double> flips = axy_period_positions(x1, x2);
  return cosine_coefficient(flips, 1.0, k);
}

namespace detail {

// u - v = d, u^3 - v^3 = c with 0 < u < v < 1; returns (x1, x2) with sin(2 pi x) = (u, v).
inline std::optional<std::pair<double, double>> axy_from_sines(double d, double c) {
  if (!(d < 0)) return std::nullopt;
  const double p = (c / d - d * d) / 3;
  const double disc = d * d + 4 * p;
  if (disc < 0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double u = (d + s) / 2, v = (s - d) / 2;
  if (!(u > 0 && v < 1 && u < v)) return std::nullopt;
  return std::make_pair(std::asin(u) / two_pi, std::asin(v) / two_pi);
}

// Newton polish of (f_k - target, f_partner) in (x1, x2).
inline bool polish_pair(double& x1, double& x2, int k, int partner, double target) {
  for (int it = 0; it < 30; ++it) {
    const double r0 = axy_coefficient(x1, x2, k) - target, r1 = axy_coefficient(x1, x2, partner);
    if (std::abs(r0) < 1e-13 && std::abs(r1) < 1e-13) return true;
    const double h = 1e-7;
    const double a = (axy_coefficient(x1 + h, x2, k) - axy_coefficient(x1 - h, x2, k)) / (2 * h);
    const double b = (axy_coefficient(x1, x2 + h, k) - axy_coefficient(x1, x2 - h, k)) / (2 * h);
    const double c = (axy_coefficient(x1 + h, x2, partner) - axy_coefficient(x1 - h, x2, partner)) / (2 * h);
    const double d = (axy_coefficient(x1, x2 + h, partner) - axy_coefficient(x1, x2 - h, partner)) / (2 * h);
    const double det = a * d - b * c;
    if (std::abs(det) < 1e-14) return false;
    x1 -= (d * r0 - b * r1) / det;
    x2 -= (-c * r0 + a * r1) / det;
  }
  return std::abs(axy_coefficient(x1, x2, k) - target) < 1e-10 && std::abs(axy_coefficient(x1, x2, partner)) < 1e-10;
}

// Solutions x in (0, 1/4) of sin(2 pi k x) = s.
inline std::vector<double> sine_roots(int k, double s) {
  std::vector<double> r;
  const double a = std::asin(std::clamp(s, -1.0, 1.0));
  for (int m = -1; m <= k; ++m)
    for (double base : {a, pi - a}) {
      const double x = (base + two_pi * m) / (two_pi * k);
      if (x > 1e-9 && x < 0.25 - 1e-9) r.push_back(x);
    }
  return r;
}

}  // namespace detail

// Composite timing (x1, x2) giving f_k = f. k = 1 and k = 3 additionally null
// the partner harmonic (3 resp. 1); higher harmonics use the antisymmetric family
// sin(2 pi k x1) = -sin(2 pi k x2). f = 0 keeps equal spacing where that works.
inline std::optional<std::pair<double, double>> axy_timing(int k, double f) {
  if (k <= 0 || k % 2 == 0) return std::nullopt;
  if (k == 1 || k == 3) {
    std::optional<std::pair<double, double>> seed;
    if (k == 1) {
      const double c1 = pi * f / 4 - 1;
      seed = detail::axy_from_sines(c1 / 2, (3 * c1 - 1) / 8);
    } else {
      seed = detail::axy_from_sines(-0.5, -(4 + 3 * pi * f / 4) / 8);
    }
    if (!seed) return std::nullopt;
    double x1 = seed->first, x2 = seed->second;
    if (!detail::polish_pair(x1, x2, k, k == 1 ? 3 : 1, f)) return std::nullopt;
    if (!(0 < x1 && x1 < x2 && x2 < 0.25)) return std::nullopt;
    return std::make_pair(x1, x2);
  }
  if (f == 0 && std::abs(axy_coefficient(0.05, 0.15, k)) < 1e-12) return std::make_pair(0.05, 0.15);
  const double sigma = std::sin(pi * k / 2);
  double s = (pi * k * f / 4 - sigma) / 4;
  if (std::abs(s) > 1) return std::nullopt;
  // Choose the root pair closest to equal spacing, then keep that branch while
  // refining s against the integrated coefficient.
  std::optional<std::pair<double, double>> best;
  double best_cost = 1e300;
  for (double a : detail::sine_roots(k, s))
    for (double b : detail::sine_roots(k, -s)) {
      if (!(a < b)) continue;
      const double cost = (a - 0.05) * (a - 0.05) + (b - 0.15) * (b - 0.15);
      if (cost < best_cost) best_cost = cost, best = std::make_pair(a, b);
    }
  if (!best) return std::nullopt;
  // Branch bookkeeping: x = (branch angle + 2 pi m) / (2 pi k).
  auto branch = [k](double x, double sv) {
    const double ang = two_pi * k * x;
    const double a = std::asin(std::clamp(sv, -1.0, 1.0));
    const double m1 = (ang - a) / two_pi, m2 = (ang - (pi - a)) / two_pi;
    return std::abs(m1 - std::round(m1)) < std::abs(m2 - std::round(m2)) ? std::make_pair(0, int(std::lround(m1)))
                                                                         : std::make_pair(1, int(std::lround(m2)));
  };
  const auto b1 = branch(best->first, s), b2 = branch(best->second, -s);
  auto place = [k](std::pair<int, int> br, double sv) {
    const double a = std::asin(std::clamp(sv, -1.0, 1.0));
    return ((br.first == 0 ? a : pi - a) + two_pi * br.second) / (two_pi * k);
  };
  for (int it = 0; it < 20; ++it) {
    const double x1 = place(b1, s), x2 = place(b2, -s);
    const double r = axy_coefficient(x1, x2, k) - f;
    if (std::abs(r) < 1e-13) break;
    const double h = 1e-7;
    const double dr = (axy_coefficient(place(b1, s + h), place(b2, -s - h), k) -
                       axy_coefficient(place(b1, s - h), place(b2, -s + h), k)) / (2 * h);
    if (dr == 0) break;
    s = std::clamp(s - r / dr, -1.0, 1.0);
  }
  const double x1 = place(b1, s), x2 = place(b2, -s);
  if (!(0 < x1 && x1 < x2 && x2 < 0.25) || std::abs(axy_coefficient(x1, x2, k) - f) > 1e-10) return std::nullopt;
  return std::make_pair(x1, x2);
}

// Empirically reachable f_k interval of the composite construction (scan + bisection).
inline std::pair<double, double> axy_coefficient_range(int k) {
  const double fmax = 4.0 / (pi * k) * 5;
  auto ok = [k](double f) { return axy_timing(k, f).has_value(); };
  auto edge = [&](double dir) {
    double lo = 0, hi = 0;
    const int n = 400;
    for (int i = 1; i <= n; ++i) {
      const double f = dir * fmax * i / n;
      if (ok(f)) lo = f; else { hi = f; break; }
    }
    if (hi == 0) return lo;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
    return lo;
  };
  return {edge(-1), edge(1)};
}

// ---------------------------------------------------------------- compilation

inline int block_length(Family f) {
  switch (f) {
    case Family::CPMG: return 2;
    case Family::XY8: return 8;
    case Family::AXY8: return 40;
    case Family::custom: return 1;
  }
  return 1;
}

inline PulseSequence build_sequence(Family family, int k_dd, double target_frequency, double f_k_target, int n_pulses) {
  if (k_dd <= 0 || k_dd % 2 == 0) throw Error(Errc::even_harmonic, "k_dd = " + std::to_string(k_dd) + " must be odd");
  if (!(target_frequency > 0)) throw Error(Errc::invalid_argument, "target frequency must be positive");
  const int block = block_length(family);
  if (n_pulses <= 0 || n_pulses % block != 0)
    throw Error(Errc::invalid_argument, std::string(family_name(family)) + " needs a multiple of " +
                                            std::to_string(block) + " pulses, got " + std::to_string(n_pulses));
  PulseSequence seq;
  seq.family = family;
  seq.k_dd = k_dd;
  seq.omega_dd = target_frequency / k_dd;
  const double T = seq.period();
  if (family == Family::CPMG || family == Family::XY8) {
    for (int p = 1; p <= n_pulses; ++p)
      seq.pulses.push_back({pi * (p - 0.5) / seq.omega_dd, family == Family::XY8 ? xy8_phases[(p - 1) % 8] : 0.0, 0});
    seq.total_time = n_pulses * pi / seq.omega_dd;
    seq.f_k_target = 4 / (pi * k_dd) * ((k_dd - 1) / 2 % 2 ? -1 : 1);
    seq.unit_pulses = block;
    seq.unit_duration = block / 2 * T;
  } else if (family == Family::AXY8) {
    const auto x = axy_timing(k_dd, f_k_target);
    if (!x) {
      const auto r = axy_coefficient_range(k_dd);
      std::ostringstream msg;
      msg << "f_" << k_dd << " = " << f_k_target << " outside reachable range [" << r.first << ", " << r.second << "]";
      throw Error(Errc::unreachable_coefficient, msg.str());
    }
    seq.composite = true;
    seq.x1 = x->first;
    seq.x2 = x->second;
    seq.f_k_target = f_k_target;
    const auto pos = axy_period_positions(seq.x1, seq.x2);
    const int periods = n_pulses / 10;
    for (int q = 0; q < periods; ++q)
      for (int i = 0; i < 10; ++i) {
        const int composite = 2 * q + i / 5;
        seq.pulses.push_back({(q + pos[i]) * T, xy8_phases[composite % 8] + knill_phases[i % 5], 0});
      }
    seq.total_time = periods * T;
    seq.unit_pulses = block;
    seq.unit_duration = 4 * T;
  } else {
    throw Error(Errc::invalid_argument, "custom sequences are assembled directly");
  }
  return seq;
}

inline PulseSequence apply_errors(PulseSequence seq, const PulseErrorModel& err) {
  if (!(err.rabi > 0)) throw Error(Errc::invalid_argument, "rabi must be positive");
  const double d = err.pulse_duration > 0 ? err.pulse_duration : pi / err.rabi;
  for (std::size_t i = 0; i < seq.pulses.size(); ++i) {
    const double lo = i ? seq.pulses[i - 1].time : 0.0;
    const double gap = seq.pulses[i].time - lo;
    if (gap < (i ? d : d / 2) * (1 + 1e-12))
      throw Error(Errc::overlapping_pulses, "pulse " + std::to_string(i) + " does not fit its window");
    seq.pulses[i].duration = d;
  }
  if (!seq.pulses.empty() && seq.total_time - seq.pulses.back().time < d / 2)
    throw Error(Errc::overlapping_pulses, "last pulse overruns the sequence");
  PulseErrorModel e = err;
  e.pulse_duration = d;
  seq.errors = e;
  return seq;
}

// ---------------------------------------------------------------- RF drive

struct RfPulse {
  double rabi = 0;          // rad/s
  double phase = 0;         // rad, in [0, 2pi)
  double duration = 0;      // s
  double carrier = 0;       // rad/s
  double frame_offset = 0;  // rad/s
};

inline RfPulse rf_pi_pulse(const SpinRegister& reg, double phase, double rabi) {
  if (reg.size() == 0) throw Error(Errc::empty_register, "RF pulse needs a nucleus");
  if (!(rabi > 0)) throw Error(Errc::invalid_argument, "RF rabi must be positive");
  RfPulse p;
  p.rabi = rabi;
  p.phase = std::fmod(std::fmod(phase, two_pi) + two_pi, two_pi);
  p.duration = pi / rabi;
  p.carrier = reg.nucleus(1).larmor;
  return p;
}

// ---------------------------------------------------------------- timed-event text

inline void write_events(std::ostream& os, const PulseSequence& seq) {
  os << "# time_s phase_rad duration_s\n" << std::setprecision(17);
  for (const auto& p : seq.pulses) os << p.time << ' ' << p.phase << ' ' << p.duration << '\n';
}

inline std::vector<Pulse> read_events(std::istream& is) {
  std::vector<Pulse> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Pulse p;
    if (!(ls >> p.time >> p.phase >> p.duration))
      throw Error(Errc::config_parse, "event malformed at line " + std::to_string(lineno));
    out.push_back(p);
  }
  return out;
}

}  // namespace nvreg
