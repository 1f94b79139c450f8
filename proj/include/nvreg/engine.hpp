#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "nvreg/evolution.hpp"
#include "nvreg/hamiltonian.hpp"
#include "nvreg/sequence.hpp"

namespace nvreg {

// Circularly polarized RF drive, rabi * sum_j I_j^{phase - carrier t} (global
// azimuth, lab time t), switched on over [t_on, t_off).
struct RfDrive {
  double rabi = 0;
  double phase = 0;
  double carrier = 0;
  double t_on = 0, t_off = 0;
};

struct EngineOptions {
  HamiltonianOptions hamiltonian;
  int rf_steps_per_period = 16;  // Magnus steps per carrier period
};

// Exact lab-frame propagation of pulse sequences. The static Hamiltonian is
// block diagonal in the electron levels and diagonalized once; free segments
// are cached by duration, finite pulses by (phase, error model).
class LabEngine {
 public:
  explicit LabEngine(const SpinRegister& reg, EngineOptions opt = {}) : reg_(reg), opt_(opt) {
    h0_ = nuclear_block(reg, 0, opt.hamiltonian);
    h1_ = nuclear_block(reg, 1, opt.hamiltonian);
    s0_ = Spectral(h0_);
    s1_ = Spectral(h1_);
    d_ = h0_.rows();
    if (reg.size() > 0) {
      Matrix jp = Matrix::Zero(d_, d_);
      Matrix sp(2, 2);
      sp << 0, 1, 0, 0;  // I^+ in (|up>, |down>)
      for (int j = 1; j <= reg.size(); ++j) jp += nuclear_operator(reg, j, sp);
      jplus_ = jp;
      jp0_ = s0_.vecs.adjoint() * jp * s0_.vecs;
      jp1_ = s1_.vecs.adjoint() * jp * s1_.vecs;
    }
  }

  const SpinRegister& reg() const { return reg_; }
  Eigen::Index dim() const { return 2 * d_; }
  Matrix identity() const { return Matrix::Identity(2 * d_, 2 * d_); }
  Matrix lab_hamiltonian() const { return block_diag(h0_, h1_); }

  void free(Matrix& u, double dt) {
    if (dt <= 0) return;
    auto it = free_cache_.find(dt);
    if (it == free_cache_.end()) {
      if (free_cache_.size() > 4096) free_cache_.clear();
      it = free_cache_.emplace(dt, std::make_pair(s0_.evolve(dt), s1_.evolve(dt))).first;
    }
    u.topRows(d_) = (it->second.first * u.topRows(d_)).eval();
    u.bottomRows(d_) = (it->second.second * u.bottomRows(d_)).eval();
  }

  // Left-multiply by (r (x) 1) for a 2x2 electron operator.
  void electron(Matrix& u, const Matrix& r) const {
    const Matrix top = u.topRows(d_), bot = u.bottomRows(d_);
    u.topRows(d_) = r(0, 0) * top + r(0, 1) * bot;
    u.bottomRows(d_) = r(1, 0) * top + r(1, 1) * bot;
  }

  Matrix electron_rotation(double angle, double phase) const {
    return expm_hermitian(0.5 * electron_pauli(reg_.ms(), Axis::at(phase)), angle);
  }

  // Microwave drive term 1/2 rabi (1 + eps)(cos phi sx + sin phi sy) + 1/2 delta sz.
  Matrix mw_term(double phase, const PulseErrorModel& e) const {
    const Matrix m = 0.5 * e.rabi * (1 + e.amplitude_frac) * electron_pauli(reg_.ms(), Axis::at(phase)) +
                     0.5 * e.detuning * electron_pauli(reg_.ms(), Axis::Z());
    return kron(m, Matrix::Identity(d_, d_));
  }

  void pulse(Matrix& u, const Pulse& p, const std::optional<PulseErrorModel>& err, const RfDrive* rf, double t_abs) {
    if (p.duration <= 0 || !err) {
      electron(u, electron_rotation(err ? err->angle() : pi, p.phase));
      return;
    }
    if (rf && t_abs + 0.5 * p.duration > rf->t_on && t_abs - 0.5 * p.duration < rf->t_off) {
      Matrix h = lab_hamiltonian() + mw_term(p.phase, *err) + rf_term(*rf, t_abs);
      u = expm_hermitian(h, p.duration) * u;
      return;
    }
    const auto key = std::make_tuple(p.phase, p.duration, err->amplitude_frac, err->detuning, err->rabi);
    auto it = pulse_cache_.find(key);
    if (it == pulse_cache_.end())
      it = pulse_cache_.emplace(key, expm_hermitian(lab_hamiltonian() + mw_term(p.phase, *err), p.duration)).first;
    u = it->second * u;
  }

  // Full-register RF Hamiltonian at lab time t.
  Matrix rf_term(const RfDrive& rf, double t) const {
    const double psi = rf.phase - rf.carrier * t;
    const Matrix hp = 0.5 * rf.rabi * std::exp(-I_unit * psi) * jplus_;
    return kron(Matrix::Identity(2, 2), Matrix(hp + hp.adjoint()));
  }

  // Free evolution over lab times [ta, tb], with the RF drive where it is on.
  void free_rf(Matrix& u, double ta, double tb, const RfDrive* rf) {
    if (!rf || rf->rabi == 0 || tb <= rf->t_on || ta >= rf->t_off) {
      free(u, tb - ta);
      return;
    }
    const double on = std::max(ta, rf->t_on), off = std::min(tb, rf->t_off);
    free(u, on - ta);
    driven(u, on, off, *rf);
    free(u, tb - off);
  }

  // Run `seq` starting at lab time t0; returns the lab-frame propagator.
  Matrix run(const PulseSequence& seq, double t0 = 0, const RfDrive* rf = nullptr) {
    const int n = static_cast<int>(seq.pulses.size());
    const bool periodic = seq.unit_pulses > 0 && n % seq.unit_pulses == 0 && n >= seq.unit_pulses;
    bool rf_periodic = !rf || rf->rabi == 0;
    if (!rf_periodic) {
      const double turns = rf->carrier * seq.unit_duration / two_pi;
      rf_periodic = std::abs(turns - std::round(turns)) < 1e-9 && rf->t_on <= t0 &&
                    rf->t_off >= t0 + seq.total_time;
    }
    if (periodic && rf_periodic && seq.units() > 1) {
      const Matrix unit = run_range(seq, 0, seq.unit_pulses, 0, seq.unit_duration, t0, rf);
      return matrix_power(unit, seq.units());
    }
    return run_range(seq, 0, n, 0, seq.total_time, t0, rf);
  }

  Matrix run_range(const PulseSequence& seq, int i0, int i1, double ts, double te, double t0, const RfDrive* rf) {
    Matrix u = identity();
    double cursor = ts;
    for (int i = i0; i < i1; ++i) {
      const Pulse& p = seq.pulses[i];
      const double half = 0.5 * p.duration;
      free_rf(u, t0 + cursor, t0 + p.time - half, rf);
      pulse(u, p, seq.errors, rf, t0 + p.time);
      cursor = p.time + half;
    }
    free_rf(u, t0 + cursor, t0 + te, rf);
    return u;
  }

 private:
  // Fourth-order Magnus steps in the interaction picture of the static
  // Hamiltonian, separately in each electron block.
  void driven(Matrix& u, double ta, double tb, const RfDrive& rf) {
    if (tb <= ta) return;
    const double hmax = two_pi / (std::abs(rf.carrier) * opt_.rf_steps_per_period);
    const int steps = std::max(1, static_cast<int>(std::ceil((tb - ta) / hmax)));
    const double h = (tb - ta) / steps;
    const double c = std::sqrt(3.0) / 6;
    for (int blk = 0; blk < 2; ++blk) {
      const Spectral& s = blk ? s1_ : s0_;
      const Matrix& jp = blk ? jp1_ : jp0_;
      Matrix w = Matrix::Identity(d_, d_);
      auto a_of = [&](double t) {  // -i H_I(t)
        const double psi = rf.phase - rf.carrier * t;
        Matrix hp = 0.5 * rf.rabi * std::exp(-I_unit * psi) * jp;
        Matrix hi = hp + hp.adjoint();
        const double tau = t - ta;
        for (Eigen::Index a = 0; a < d_; ++a)
          for (Eigen::Index b = 0; b < d_; ++b) hi(a, b) *= std::exp(I_unit * ((s.vals(a) - s.vals(b)) * tau));
        return Matrix(-I_unit * hi);
      };
      for (int k = 0; k < steps; ++k) {
        const double tm = ta + (k + 0.5) * h;
        const Matrix a1 = a_of(tm - c * h), a2 = a_of(tm + c * h);
        const Matrix om = 0.5 * h * (a1 + a2) + (std::sqrt(3.0) / 12) * h * h * (a2 * a1 - a1 * a2);
        Matrix k_herm = I_unit * om;
        k_herm = 0.5 * (k_herm + k_herm.adjoint()).eval();
        w = Spectral(k_herm).evolve(1.0) * w;
      }
      Vector ph(d_);
      for (Eigen::Index a = 0; a < d_; ++a) ph(a) = std::exp(-I_unit * (s.vals(a) * (tb - ta)));
      const Matrix full = s.vecs * ph.asDiagonal() * w * s.vecs.adjoint();
      if (blk == 0)
        u.topRows(d_) = (full * u.topRows(d_)).eval();
      else
        u.bottomRows(d_) = (full * u.bottomRows(d_)).eval();
    }
  }

  SpinRegister reg_;
  EngineOptions opt_;
  Matrix h0_, h1_, jplus_, jp0_, jp1_;
  Spectral s0_, s1_;
  Eigen::Index d_ = 1;
  std::map<double, std::pair<Matrix, Matrix>> free_cache_;
  std::map<std::tuple<double, double, double, double, double>, Matrix> pulse_cache_;
};

// ---------------------------------------------------------------- equivalence checks

struct FidelityReport {
  double fidelity = 0;
  double theta = 0;
  double duration = 0;
  int pulses = 0;
  double amplitude_frac = 0;
  double detuning = 0;
};

// Nuclei addressed by the effective gate: the pair if designated, else nucleus 1.
inline std::vector<int> addressed_nuclei(const SpinRegister& reg) {
  if (reg.has_pair()) return {1, 2};
  if (reg.size() == 0) return {};
  return {1};
}

inline Matrix effective_gate_on(const SpinRegister& reg, const std::vector<int>& nuclei, double theta) {
  Matrix g = Matrix::Zero(reg.dim(), reg.dim());
  const Matrix sz = site_operator(reg, Site::electron(), Axis::Z());
  for (int j : nuclei) g += sz * site_operator(reg, Site::nucleus(j), Axis::X());
  return expm_hermitian(g, theta);
}

// Restrict a full-register operator to (electron + listed nuclei) qubits; valid
// for operators acting as identity elsewhere.
inline Matrix restrict_to(const SpinRegister& reg, const Matrix& full, const std::vector<int>& nuclei) {
  std::vector<int> sys{0};
  for (int j : nuclei) sys.push_back(j);
  QubitSplit split(reg.qubits(), sys);
  Matrix r(split.dim_sys(), split.dim_sys());
  for (int a = 0; a < split.dim_sys(); ++a)
    for (int b = 0; b < split.dim_sys(); ++b) r(a, b) = full(split.index(a, 0), split.index(b, 0));
  return r;
}

// Fidelity of a propagator against an ideal acting on (electron + nuclei), the
// remaining nuclei free to evolve by any unitary.
inline double fidelity_on(const SpinRegister& reg, const Matrix& u, const Matrix& ideal_full,
                          const std::vector<int>& nuclei) {
  std::vector<int> sys{0};
  for (int j : nuclei) sys.push_back(j);
  if (static_cast<int>(sys.size()) == reg.qubits()) return gate_fidelity(u, ideal_full);
  QubitSplit split(reg.qubits(), sys);
  return subsystem_fidelity(u, restrict_to(reg, ideal_full, nuclei), split);
}

inline FidelityReport time_domain_equivalence(const SpinRegister& reg, const PulseSequence& seq,
                                              std::optional<double> theta = std::nullopt,
                                              const EngineOptions& opt = {}) {
  FidelityReport rep;
  rep.duration = seq.total_time;
  rep.pulses = static_cast<int>(seq.pulses.size());
  if (seq.errors) rep.amplitude_frac = seq.errors->amplitude_frac, rep.detuning = seq.errors->detuning;
  const auto nuclei = addressed_nuclei(reg);
  if (nuclei.empty() || seq.pulses.empty()) {
    rep.theta = 0;
    rep.fidelity = 1;
    return rep;
  }
  rep.theta = theta ? *theta : seq.f_k_target * reg.nucleus(nuclei[0]).hyperfine.a_perp * seq.total_time / 4;
  LabEngine eng(reg, opt);
  const Matrix u = to_rotating_frame(eng.run(seq), reg, default_frame(reg), seq.total_time);
  rep.fidelity = fidelity_on(reg, u, effective_gate_on(reg, nuclei, rep.theta), nuclei);
  return rep;
}

}  // namespace nvreg
