#pragma once

#include <cmath>
#include <vector>

#include "nvreg/hamiltonian.hpp"
#include "nvreg/linalg.hpp"
#include "nvreg/spin.hpp"

namespace nvreg {

// Rotating frame at frequencies w'_j. Each free block of length T adds
// (omega_j - w'_j) T to the phases seen by later RF controls on nucleus j.
struct RotatingFrame {
  std::vector<double> frequency;
  std::vector<double> offset;  // Delta_rot per nucleus
  std::vector<double> accumulated;

  RotatingFrame() = default;
  RotatingFrame(const SpinRegister& reg, std::vector<double> w) : frequency(std::move(w)) {
    for (int j = 1; j <= reg.size(); ++j) offset.push_back(reg.nucleus(j).larmor - frequency[j - 1]);
    accumulated.assign(offset.size(), 0.0);
  }
  void advance(double t) {
    for (std::size_t j = 0; j < offset.size(); ++j) accumulated[j] += offset[j] * t;
  }
  double rf_phase(int j, double phase) const { return phase + accumulated.at(j - 1); }
};

struct Segment {
  Matrix hamiltonian;
  double duration = 0;
};

struct Schedule {
  std::vector<Segment> segments;
  RotatingFrame frame;

  double total_duration() const {
    double t = 0;
    for (const auto& s : segments) t += s.duration;
    return t;
  }
};

struct UnitaryResult {
  Matrix propagator;
  int wall_segments = 0;
  double max_unitarity_defect = 0;
};

inline UnitaryResult propagate(const SpinRegister& reg, const Schedule& schedule) {
  UnitaryResult r;
  r.propagator = Matrix::Identity(reg.dim(), reg.dim());
  for (const auto& seg : schedule.segments) {
    if (seg.hamiltonian.rows() != reg.dim() || seg.hamiltonian.cols() != reg.dim())
      throw Error(Errc::dimension_mismatch, "segment Hamiltonian dimension");
    if (!is_hermitian(seg.hamiltonian)) throw Error(Errc::non_hermitian_segment, "segment Hamiltonian");
    if (!(seg.duration > 0)) throw Error(Errc::invalid_argument, "segment duration must be positive");
    const Matrix u = expm_hermitian(seg.hamiltonian, seg.duration);
    r.max_unitarity_defect = std::max(r.max_unitarity_defect, unitarity_defect(u));
    r.propagator = u * r.propagator;
    ++r.wall_segments;
  }
  r.max_unitarity_defect = std::max(r.max_unitarity_defect, unitarity_defect(r.propagator));
  return r;
}

struct EffectiveGate {
  Matrix unitary;
  double duration = 0;
};

// Pair generator sigma_z (I_1^x + I_2^x) in local frames.
inline Matrix pair_interaction_generator(const SpinRegister& reg) {
  if (!reg.has_pair()) throw Error(Errc::no_pair_designated, "register has no Larmor pair");
  const Matrix sz = site_operator(reg, Site::electron(), Axis::Z());
  return sz * (site_operator(reg, Site::nucleus(1), Axis::X()) + site_operator(reg, Site::nucleus(2), Axis::X()));
}

// U_int(theta) = exp[-i theta sigma_z (I_1^x + I_2^x)], duration 4 theta / (f_k A_perp).
inline EffectiveGate effective_interaction(const SpinRegister& reg, double f_k, double a_perp, double theta) {
  EffectiveGate g;
  g.unitary = expm_hermitian(pair_interaction_generator(reg), theta);
  g.duration = theta == 0 ? 0.0 : 4 * theta / (f_k * a_perp);
  return g;
}

}  // namespace nvreg
