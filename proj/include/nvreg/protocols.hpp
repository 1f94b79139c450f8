#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nvreg/constants.hpp"
#include "nvreg/engine.hpp"
#include "nvreg/random.hpp"
#include "nvreg/selective.hpp"

namespace nvreg {

enum class Mode { ideal, time_domain };

// Measurement handling: sample from Born probabilities or force an outcome.
enum class Measurement { sample, postselect_0, postselect_1 };

struct SequenceParams {
  int interaction_harmonic = 47;  // U_int blocks inside R_pi
  int interaction_pulses = 200;
  int storage_harmonic = 45;      // U_int(pi/2) blocks of storage / retrieval
  int storage_pulses = 320;
  int pi_window_pulses = 40;
  int pi_harmonic = 0;            // 0: smallest odd k whose window fits pi / rf_rabi
  double rf_rabi = kHz2pi(8);
  double mw_rabi = MHz2pi(20);
  bool finite_pulses = true;
  int dee_pulses = 245;
  double dee_tau = 0.5e-6;        // snapped so that omega tau / pi = m + 5/8
  int max_reps = 4;
  int rf_steps_per_period = 16;
  bool dipolar = true;
};

struct ProtocolResult {
  std::string name;
  std::optional<QuantumState> final_state;
  std::optional<Matrix> unitary;  // rotating-frame propagator, for gate protocols
  std::vector<int> outcome;
  double fidelity_vs_ideal = 0;
  double duration = 0;
  int pulse_count = 0;
  std::optional<SelectiveGatePlan> plan;
  std::map<std::string, double> extra;
};

// ---------------------------------------------------------------- helpers

inline Matrix electron_gate(const SpinRegister& reg, const Matrix& r2) {
  return kron(r2, Matrix::Identity(reg.dim() / 2, reg.dim() / 2));
}

// exp(-i angle/2 sigma_phi) on the electron
inline Matrix electron_rotation_2(int ms, double angle, double phase) {
  return expm_hermitian(0.5 * electron_pauli(ms, Axis::at(phase)), angle);
}

// Hadamard-like H_y = exp(-i s pi/4 sigma_y), s = -m_s.
inline Matrix hadamard_y(int ms) { return expm_hermitian(electron_pauli(ms, Axis::Y()), -ms * pi / 4); }

// Logical X on the DFS qubit: pi rotations of both pair spins about their
// local x axes, swapping |up,down> and |down,up> (local-frame basis) without
// relative phase.
inline Matrix dfs_logical_x(const SpinRegister& reg) {
  const Matrix g = site_operator(reg, Site::nucleus(1), Axis::X()) + site_operator(reg, Site::nucleus(2), Axis::X());
  return expm_hermitian(g, pi);
}

inline PulseErrorModel pulse_model(const SequenceParams& sp, const std::optional<PulseErrorModel>& errors) {
  if (errors) {
    PulseErrorModel e = *errors;
    if (!(e.rabi > 0)) e.rabi = sp.mw_rabi;
    return e;
  }
  return PulseErrorModel::with_rabi(sp.mw_rabi);
}

inline bool uses_finite_pulses(const SequenceParams& sp, const std::optional<PulseErrorModel>& errors) {
  return sp.finite_pulses || errors.has_value();
}

inline double axy_duration(const SpinRegister& reg, int k, int pulses) {
  return pulses / 10.0 * two_pi * k / reg.nucleus(1).larmor;
}

inline bool coefficient_reachable(int k, double f) {
  const auto r = axy_coefficient_range(k);
  return f >= r.first && f <= r.second;
}

// theta or -theta, whichever the AXY construction can reach at harmonic k in
// a block of `pulses` pulses.
inline double reachable_theta(const SpinRegister& reg, double theta, int k, int pulses) {
  const double a = reg.nucleus(1).hyperfine.a_perp;
  const double f = 4 * theta / (a * axy_duration(reg, k, pulses));
  if (coefficient_reachable(k, f)) return theta;
  if (coefficient_reachable(k, -f)) return -theta;
  const auto r = axy_coefficient_range(k);
  throw Error(Errc::unreachable_coefficient, "|f_" + std::to_string(k) + "| = " + std::to_string(std::abs(f)) +
                                                 " outside [" + std::to_string(r.first) + ", " +
                                                 std::to_string(r.second) + "]");
}

// AXY block realizing U_int(theta) on the pair with a fixed pulse count.
inline PulseSequence interaction_sequence(const SpinRegister& reg, double theta, int k, int pulses,
                                          const SequenceParams& sp, const std::optional<PulseErrorModel>& errors) {
  const double w = reg.nucleus(1).larmor;
  const double f = 4 * theta / (reg.nucleus(1).hyperfine.a_perp * axy_duration(reg, k, pulses));
  PulseSequence s = build_sequence(Family::AXY8, k, w, f, pulses);
  if (uses_finite_pulses(sp, errors)) s = apply_errors(s, pulse_model(sp, errors));
  return s;
}

inline int pi_window_harmonic(const SpinRegister& reg, const SequenceParams& sp) {
  if (sp.pi_harmonic > 0) return sp.pi_harmonic;
  const double need = pi / sp.rf_rabi;
  int k = 1;
  while (axy_duration(reg, k, sp.pi_window_pulses) < need) k += 2;
  return k;
}

// Decoupling window (f_k = 0) hosting the RF pi pulse.
inline PulseSequence pi_window_sequence(const SpinRegister& reg, const SequenceParams& sp,
                                        const std::optional<PulseErrorModel>& errors) {
  PulseSequence s = build_sequence(Family::AXY8, pi_window_harmonic(reg, sp), reg.nucleus(1).larmor, 0.0,
                                   sp.pi_window_pulses);
  if (uses_finite_pulses(sp, errors)) s = apply_errors(s, pulse_model(sp, errors));
  return s;
}

// Asymmetric equal-phase block: N pulses with XY8 phases, windows
// tau(1+eta)/2, tau(1-eta), tau(1+eta), ..., tau(1-eta)/2 (N odd) so the
// sign-weighted time is S = N tau eta over a total N tau.
inline PulseSequence dee_sequence(const SpinRegister& reg, double signed_time, const SequenceParams& sp,
                                  const std::optional<PulseErrorModel>& errors) {
  const int n = sp.dee_pulses;
  if (n < 1) throw Error(Errc::invalid_argument, "dee_pulses must be positive");
  const double w = reg.nucleus(1).larmor;
  // omega tau / pi = m + 5/8 keeps the nucleus off the modulation harmonics
  // (integers) and off the lines of the 8-pulse phase cycle (quarters).
  const double m = std::max(0.0, std::round(w * sp.dee_tau / pi - 0.625));
  const double tau = (m + 0.625) * pi / w;
  const double eta = signed_time / (n * tau);
  if (std::abs(eta) >= 1) throw Error(Errc::invalid_argument, "DEE block too short for the requested phase");
  PulseSequence s;
  s.family = Family::custom;
  s.omega_dd = pi / tau;
  double t = 0;
  for (int i = 0; i < n; ++i) {
    const double win = i == 0 ? tau * (1 + eta) / 2 : tau * (1 + (i % 2 ? -eta : eta));
    t += win;
    s.pulses.push_back({t, xy8_phases[i % 8], 0});
  }
  s.total_time = n * tau;
  s.unit_pulses = 0;
  if (uses_finite_pulses(sp, errors)) s = apply_errors(s, pulse_model(sp, errors));
  return s;
}

// Ideal rotating-frame counterpart of a pulse train: product of ideal electron
// pi pulses times the secular hyperfine phase accumulated with toggling signs.
inline Matrix ideal_secular_train(const SpinRegister& reg, const PulseSequence& seq) {
  Matrix pn = Matrix::Identity(2, 2);
  double signed_time = 0, last = 0;
  int sign = 1;
  for (const auto& p : seq.pulses) {
    signed_time += sign * (p.time - last);
    last = p.time;
    sign = -sign;
    pn = electron_rotation_2(reg.ms(), pi, p.phase) * pn;
  }
  signed_time += sign * (seq.total_time - last);
  return electron_gate(reg, pn) * expm_hermitian(free_hamiltonian(reg, 0.0), signed_time);
}

// ---------------------------------------------------------------- time-domain composer

// Accumulates a lab-frame propagator from pulse sequences and instantaneous
// rotating-frame operations; sequences are cached by tag and RF phase.
class TimeDomainRun {
 public:
  TimeDomainRun(const SpinRegister& reg, const EngineOptions& opt)
      : reg_(reg), eng_(reg, opt), u_(eng_.identity()), frame_(default_frame(reg)) {}

  void sequence(const PulseSequence& s, const std::string& tag, std::optional<RfDrive> rf = std::nullopt) {
    std::string key = tag;
    if (rf) {
      const double eff = std::fmod(std::fmod(rf->phase - rf->carrier * t_, two_pi) + two_pi, two_pi);
      key += "@" + std::to_string(std::llround(eff * 1e9));
    }
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      Matrix u;
      if (rf) {
        RfDrive d = *rf;
        d.t_on = t_;
        d.t_off = t_ + s.total_time;
        u = eng_.run(s, t_, &d);
      } else {
        u = eng_.run(s);
      }
      it = cache_.emplace(key, std::move(u)).first;
    }
    u_ = it->second * u_;
    t_ += s.total_time;
    pulses_ += static_cast<int>(s.pulses.size());
  }

  // Control-free evolution (no pulses, no RF).
  void delay(double dt) {
    eng_.free(u_, dt);
    t_ += dt;
  }

  // Operation defined in the rotating frame, applied at the current time.
  void rotating_op(const Matrix& op) {
    const Vector ph = frame_phases(reg_, frame_, t_);
    Vector full(2 * ph.size());
    full << ph, ph;
    u_ = full.conjugate().asDiagonal() * op * full.asDiagonal() * u_;
  }

  Matrix rotating() const { return to_rotating_frame(u_, reg_, frame_, t_); }
  double time() const { return t_; }
  int pulses() const { return pulses_; }

 private:
  SpinRegister reg_;
  LabEngine eng_;
  Matrix u_;
  std::vector<double> frame_;
  double t_ = 0;
  int pulses_ = 0;
  std::map<std::string, Matrix> cache_;
};

inline EngineOptions engine_options(const SequenceParams& sp) {
  EngineOptions o;
  o.hamiltonian.dipolar = sp.dipolar;
  o.rf_steps_per_period = sp.rf_steps_per_period;
  return o;
}

// Plan adjusted to the interaction-angle sign reachable at the configured harmonic.
inline SelectiveGatePlan time_domain_plan(const SelectiveGatePlan& plan, const SpinRegister& reg,
                                          const SequenceParams& sp) {
  const double th = reachable_theta(reg, plan.theta, sp.interaction_harmonic, sp.interaction_pulses);
  return with_theta(plan, th, reg);
}

inline void append_r_pi(TimeDomainRun& run, const SpinRegister& reg, const SelectiveGatePlan& plan,
                        const SequenceParams& sp, const std::optional<PulseErrorModel>& errors) {
  const PulseSequence s_int =
      interaction_sequence(reg, plan.theta, sp.interaction_harmonic, sp.interaction_pulses, sp, errors);
  const PulseSequence s_pi = pi_window_sequence(reg, sp, errors);
  RfDrive rf;
  rf.rabi = pi / s_pi.total_time;
  rf.carrier = reg.nucleus(plan.target).larmor;
  rf.phase = reg.nucleus(3 - plan.target).hyperfine.azimuth + pi / 2;
  const std::string tag = "rpi" + std::to_string(plan.target);
  for (int r = 0; r < 2 * plan.reps; ++r) {
    run.sequence(s_int, tag + "int");
    run.sequence(s_pi, tag + "pi", rf);
    run.sequence(s_int, tag + "int");
  }
  run.rotating_op(site_operator(reg, Site::electron(), Axis::Z()));
}

// Delay to the next multiple of the pair's Larmor period, so that a following
// AXY block sees the same nuclear phase as one started at t = 0.
inline double larmor_alignment(const SpinRegister& reg, double t) {
  const double tl = two_pi / reg.nucleus(1).larmor;
  const double r = std::fmod(t, tl);
  return r < 1e-9 * tl || tl - r < 1e-9 * tl ? 0.0 : tl - r;
}

inline double r_pi_duration(const SpinRegister& reg, const SelectiveGatePlan& plan, const SequenceParams& sp) {
  return 2 * plan.reps *
         (2 * axy_duration(reg, sp.interaction_harmonic, sp.interaction_pulses) +
          axy_duration(reg, pi_window_harmonic(reg, sp), sp.pi_window_pulses));
}

inline int r_pi_pulse_count(const SelectiveGatePlan& plan, const SequenceParams& sp) {
  return 2 * plan.reps * (2 * sp.interaction_pulses + sp.pi_window_pulses);
}

// ---------------------------------------------------------------- R_pi

inline ProtocolResult r_pi_time_domain(const SelectiveGatePlan& plan, const SpinRegister& reg,
                                       const SequenceParams& sp = {},
                                       const std::optional<PulseErrorModel>& errors = std::nullopt) {
  if (!plan.solved) throw Error(Errc::plan_unsolved, "plan not solved");
  const SelectiveGatePlan p = time_domain_plan(plan, reg, sp);
  TimeDomainRun run(reg, engine_options(sp));
  append_r_pi(run, reg, p, sp, errors);
  ProtocolResult res;
  res.name = "r_pi";
  res.unitary = run.rotating();
  res.duration = run.time();
  res.pulse_count = run.pulses();
  res.plan = p;
  res.fidelity_vs_ideal = fidelity_on(reg, *res.unitary, r_pi_ideal(p, reg), {1, 2});
  if (errors) res.extra["amplitude_frac"] = errors->amplitude_frac, res.extra["detuning"] = errors->detuning;
  return res;
}

// ---------------------------------------------------------------- storage

namespace detail {

// exp(-i sum_j phi_j I_j^z) on the nuclear space: maps global-frame basis
// states to the local-frame basis in which each nucleus' x axis lies along its A_perp.
inline Vector local_basis_phases(const SpinRegister& reg) {
  std::vector<double> phi;
  for (const auto& n : reg.nuclei()) phi.push_back(n.hyperfine.azimuth);
  return frame_phases(reg, phi, -1.0).conjugate();
}

inline Vector pair_state(const SpinRegister& reg, cplx a, cplx b) {
  // a |up,down> + b |down,up> on the pair (local-frame basis), remaining nuclei up.
  const int n = reg.size();
  Vector v = Vector::Zero(Eigen::Index{1} << n);
  const Eigen::Index ud = Eigen::Index{1} << (n - 2), du = Eigen::Index{1} << (n - 1);
  v(ud) = a;
  v(du) = b;
  return local_basis_phases(reg).asDiagonal() * v;
}

inline Matrix project_electron(const SpinRegister& reg, int level) {
  Matrix p = Matrix::Zero(2, 2);
  p(level, level) = 1;
  return electron_gate(reg, p);
}

// Nuclear state (pure) from a full-register vector with the electron in `level`.
inline Vector nuclear_part(const SpinRegister& reg, const Vector& psi, int level) {
  const Eigen::Index d = reg.dim() / 2;
  return psi.segment(level * d, d);
}

inline Matrix nuclear_density(const SpinRegister& reg, const Vector& psi, int level) {
  const Vector v = nuclear_part(reg, psi, level);
  return v * v.adjoint();
}

// Reduced density on the pair from a nuclear-space density matrix.
inline Matrix pair_density(const SpinRegister& reg, const Matrix& rho_nuc) {
  const int n = reg.size();
  if (n == 2) return rho_nuc;
  const Eigen::Index dr = Eigen::Index{1} << (n - 2);
  Matrix r = Matrix::Zero(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (Eigen::Index e = 0; e < dr; ++e) r(a, b) += rho_nuc(a * dr + e, b * dr + e);
  return r;
}

inline int choose_outcome(Measurement m, double p1, std::uint64_t seed) {
  if (m == Measurement::postselect_0) return 0;
  if (m == Measurement::postselect_1) return 1;
  Rng rng(stream_seed(seed, 0));
  return uniform01(rng) < p1 ? 1 : 0;
}

}  // namespace detail

struct ProtocolOptions {
  SequenceParams sequence;
  Measurement measurement = Measurement::sample;
  std::uint64_t seed = 1;
  std::optional<PulseErrorModel> errors;
  double dfs_tolerance = 1e-9;
};

// Rotating-frame propagator of U_int(pi/2) -> H_y -> U_int(pi/2).
inline std::pair<Matrix, TimeDomainRun> storage_unitary(const SpinRegister& reg, Mode mode, const ProtocolOptions& o,
                                                        double& theta_used) {
  const SequenceParams& sp = o.sequence;
  theta_used = reachable_theta(reg, pi / 2, sp.storage_harmonic, sp.storage_pulses);
  TimeDomainRun run(reg, engine_options(sp));
  const Matrix hy = electron_gate(reg, hadamard_y(reg.ms()));
  const PulseSequence s = interaction_sequence(reg, theta_used, sp.storage_harmonic, sp.storage_pulses, sp, o.errors);
  if (mode == Mode::ideal) {
    const Matrix ui = expm_hermitian(pair_interaction_generator(reg), theta_used);
    return {ui * hy * ui, std::move(run)};
  }
  run.sequence(s, "store");
  run.rotating_op(hy);
  run.sequence(s, "store");
  Matrix u = run.rotating();
  return {u, std::move(run)};
}

// Outcome-dependent correction: the logical X where the ideal algebra needs it.
inline Matrix storage_correction(const SpinRegister& reg, double theta_used, int outcome) {
  // Decide from the ideal algebra on a generic input.
  const cplx c0(0.6, 0), c1(0, 0.8);
  const Matrix ui = expm_hermitian(pair_interaction_generator(reg), theta_used);
  const Matrix u = ui * electron_gate(reg, hadamard_y(reg.ms())) * ui;
  const Vector in = kron(qubit(c0, c1), detail::pair_state(reg, 1, 0));
  const Vector out = detail::project_electron(reg, outcome) * u * in;
  const Vector target = detail::pair_state(reg, c0, outcome ? -c1 : c1);
  const Matrix id = Matrix::Identity(reg.dim() / 2, reg.dim() / 2);
  const Matrix flip = dfs_logical_x(reg).bottomRightCorner(reg.dim() / 2, reg.dim() / 2);
  const Vector v = detail::nuclear_part(reg, out, outcome).normalized();
  return state_fidelity(v, target) >= state_fidelity(Vector(flip * v), target) ? id : flip;
}

inline ProtocolResult storage_protocol(const SpinRegister& reg, cplx c0, cplx c1, Mode mode,
                                       const ProtocolOptions& o = {}) {
  if (!reg.has_pair()) throw Error(Errc::no_pair_designated, "storage needs a Larmor pair");
  if (std::abs(std::norm(c0) + std::norm(c1) - 1) > 1e-10) throw Error(Errc::not_normalized, "|c0|^2 + |c1|^2 != 1");
  double th = 0;
  auto [u, run] = storage_unitary(reg, mode, o, th);
  const Vector psi = u * kron(qubit(c0, c1), detail::pair_state(reg, 1, 0));
  const double p1 = detail::nuclear_part(reg, psi, 1).squaredNorm();
  const int outcome = detail::choose_outcome(o.measurement, p1, o.seed);
  const double p = outcome ? p1 : 1 - p1;
  if (p < 1e-14) throw Error(Errc::invalid_argument, "postselected outcome has zero probability");
  const Vector nuc = storage_correction(reg, th, outcome) * detail::nuclear_part(reg, psi, outcome) / std::sqrt(p);
  ProtocolResult res;
  res.name = "storage";
  res.outcome = {outcome};
  res.final_state = QuantumState::pure(nuc, 1e-8);
  const Vector target = detail::pair_state(reg, c0, outcome ? -c1 : c1);
  res.fidelity_vs_ideal = state_fidelity(nuc, target);
  const double t_block = axy_duration(reg, o.sequence.storage_harmonic, o.sequence.storage_pulses);
  res.duration = mode == Mode::ideal ? 2 * t_block : run.time();
  res.pulse_count = 2 * o.sequence.storage_pulses;
  res.extra["probability"] = p;
  res.extra["theta"] = th;
  return res;
}

// ---------------------------------------------------------------- retrieval

struct RetrievalCalibration {
  double pi2_phase = 0;       // electron pi/2 axis of step (iv)
  cplx branch_phase = 1;      // relative phase between the |1> and |0> branches
  SelectiveGatePlan plan;     // R_pi on spin 2
  double theta_int = 0;       // U_int(pi/2) sign
  double dee_time = 0;        // signed hyperfine time of step (iii)
  double align = 0;           // delay closing step (iii) on the Larmor grid
};

namespace detail {

// Axis phase of a pi/2 rotation taking electron state e to |0>.
inline double pi2_phase_to_zero(int ms, const Vector& e) {
  auto score = [&](double ph) { return std::norm((electron_rotation_2(ms, pi / 2, ph) * e)(0)); };
  double best = 0, bs = -1;
  for (int i = 0; i < 3600; ++i) {
    const double ph = two_pi * i / 3600;
    const double s = score(ph);
    if (s > bs) bs = s, best = ph;
  }
  double a = best - two_pi / 3600, b = best + two_pi / 3600;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 80; ++it) {
    const double m1 = b - g * (b - a), m2 = a + g * (b - a);
    if (score(m1) > score(m2)) b = m2; else a = m1;
  }
  return 0.5 * (a + b);
}

struct RetrievalSteps {
  Matrix r_pi, dee, pi2, u_int, correction;
};

}  // namespace detail

inline Matrix x_plus_electron(const SpinRegister& reg) {
  (void)reg;
  return qubit(1 / std::sqrt(2.0), 1 / std::sqrt(2.0));
}

// Calibrate the deterministic choices of the retrieval (step (iv) axis, final
// electron phase) from the ideal constituents.
inline RetrievalCalibration calibrate_retrieval(const SpinRegister& reg, const SequenceParams& sp) {
  RetrievalCalibration cal;
  SelectiveGatePlan p2 = plan_for_register(reg, sp.max_reps, 2);
  cal.plan = time_domain_plan(p2, reg, sp);
  cal.theta_int = reachable_theta(reg, pi / 2, sp.storage_harmonic, sp.storage_pulses);
  const Matrix rpi = r_pi_ideal(cal.plan, reg);
  // The alignment delay depends only on the block length N tau; it adds
  // (-1)^N delay to the signed time, which the block absorbs.
  cal.align = larmor_alignment(reg, r_pi_duration(reg, cal.plan, sp) +
                                        dee_sequence(reg, 0.0, sp, std::nullopt).total_time);
  cal.dee_time = pi / (2 * reg.nucleus(1).hyperfine.a_par) - (sp.dee_pulses % 2 ? -1 : 1) * cal.align;
  const PulseSequence s_dee = dee_sequence(reg, cal.dee_time, sp, std::nullopt);
  const Matrix dee = expm_hermitian(free_hamiltonian(reg, 0.0), cal.align) * ideal_secular_train(reg, s_dee);
  const Matrix ui = expm_hermitian(pair_interaction_generator(reg), cal.theta_int);
  const Vector xp = x_plus_electron(reg);
  auto after3 = [&](cplx a, cplx b) { return Vector(dee * rpi * kron(xp, detail::pair_state(reg, a, b))); };
  // Branch |up,down> becomes |up,up> after the flip of spin 2; read its electron state.
  const Vector s0 = after3(1, 0);
  const int n = reg.size();
  const Eigen::Index uu = 0, d = reg.dim() / 2;
  (void)n;
  Vector e(2);
  e << s0(uu), s0(d + uu);
  cal.pi2_phase = detail::pi2_phase_to_zero(reg.ms(), e.normalized());
  const Matrix pi2 = electron_gate(reg, electron_rotation_2(reg.ms(), pi / 2, cal.pi2_phase));
  const Vector f0 = ui * pi2 * s0, f1 = ui * pi2 * after3(0, 1);
  // f0 ~ |0> n0, f1 ~ |1> n1 with n1 = g n0.
  const Vector n0 = detail::nuclear_part(reg, f0, 0), n1 = detail::nuclear_part(reg, f1, 1);
  const cplx g = n0.dot(n1);
  cal.branch_phase = std::abs(g) > 0 ? g / std::abs(g) : cplx(1);
  return cal;
}

inline Matrix retrieval_correction(const SpinRegister& reg, const RetrievalCalibration& cal) {
  Matrix z = Matrix::Identity(2, 2);
  z(1, 1) = std::conj(cal.branch_phase);
  return electron_gate(reg, z);
}

// Rotating-frame propagator of steps (ii)-(v) plus the calibrated correction.
inline Matrix retrieval_unitary(const SpinRegister& reg, Mode mode, const ProtocolOptions& o,
                                const RetrievalCalibration& cal, double& duration, int& pulses) {
  const SequenceParams& sp = o.sequence;
  const PulseSequence s_dee = dee_sequence(reg, cal.dee_time, sp, o.errors);
  const PulseSequence s_int = interaction_sequence(reg, cal.theta_int, sp.storage_harmonic, sp.storage_pulses, sp, o.errors);
  const Matrix pi2 = electron_gate(reg, electron_rotation_2(reg.ms(), pi / 2, cal.pi2_phase));
  const Matrix corr = retrieval_correction(reg, cal);
  pulses = r_pi_pulse_count(cal.plan, sp) + static_cast<int>(s_dee.pulses.size()) + sp.storage_pulses;
  if (mode == Mode::ideal) {
    duration = r_pi_duration(reg, cal.plan, sp) + s_dee.total_time + cal.align + s_int.total_time;
    const Matrix ui = expm_hermitian(pair_interaction_generator(reg), cal.theta_int);
    const Matrix dee = expm_hermitian(free_hamiltonian(reg, 0.0), cal.align) *
                       ideal_secular_train(reg, dee_sequence(reg, cal.dee_time, sp, std::nullopt));
    return corr * ui * pi2 * dee * r_pi_ideal(cal.plan, reg);
  }
  TimeDomainRun run(reg, engine_options(sp));
  append_r_pi(run, reg, cal.plan, sp, o.errors);
  run.sequence(s_dee, "dee");
  run.delay(cal.align);
  run.rotating_op(pi2);
  run.sequence(s_int, "int");
  run.rotating_op(corr);
  duration = run.time();
  return run.rotating();
}

inline bool in_dfs(const SpinRegister& reg, const Matrix& rho_nuc, double tol) {
  const Matrix r = detail::pair_density(reg, rho_nuc);
  return std::abs(r(0, 0)) + std::abs(r(3, 3)) <= tol;
}

// dfs_state: nuclear-register state (pair first) with the pair in the DFS.
// `expected` overrides the target electron state (c0, c1) read from the pair.
inline ProtocolResult retrieval_protocol(const SpinRegister& reg, const QuantumState& dfs_state, Mode mode,
                                         const ProtocolOptions& o = {}, std::optional<Vector> expected = std::nullopt) {
  if (!reg.has_pair()) throw Error(Errc::no_pair_designated, "retrieval needs a Larmor pair");
  const Eigen::Index dn = reg.dim() / 2;
  if (dfs_state.dim() != dn) throw Error(Errc::dimension_mismatch, "dfs_state must live on the nuclear register");
  const Matrix rho_n = dfs_state.density();
  if (!in_dfs(reg, rho_n, o.dfs_tolerance))
    throw Error(Errc::state_outside_dfs, "population outside span{|up,down>, |down,up>}");
  const RetrievalCalibration cal = calibrate_retrieval(reg, o.sequence);
  double duration = 0;
  int pulses = 0;
  const Matrix u = retrieval_unitary(reg, mode, o, cal, duration, pulses);
  const Vector xp = x_plus_electron(reg);
  const Matrix rho0 = kron(Matrix(xp * xp.adjoint()), rho_n);
  const Matrix rho = u * rho0 * u.adjoint();
  Matrix rho_e(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) rho_e(a, b) = rho.block(a * dn, b * dn, dn, dn).trace();
  ProtocolResult res;
  res.name = "retrieval";
  res.final_state = QuantumState::mixed(rho_e, 1e-8);
  res.duration = duration;
  res.pulse_count = pulses;
  res.plan = cal.plan;
  if (!expected) {
    const Vector l = detail::local_basis_phases(reg);
    const Matrix r = detail::pair_density(reg, l.conjugate().asDiagonal() * rho_n * l.asDiagonal());
    // Pure DFS input: expected electron state (c0, c1) read from the pair amplitudes.
    Eigen::SelfAdjointEigenSolver<Matrix> es(r);
    const Vector top = es.eigenvectors().col(3);
    Vector e(2);
    e << top(1), top(2);
    expected = e.normalized();
  }
  res.fidelity_vs_ideal = state_fidelity(rho_e, *expected);
  return res;
}

// Storage followed by retrieval; the outcome-1 sign is undone on the electron.
inline ProtocolResult round_trip(const SpinRegister& reg, cplx c0, cplx c1, Mode mode, const ProtocolOptions& o = {}) {
  const ProtocolResult st = storage_protocol(reg, c0, c1, mode, o);
  ProtocolOptions ro = o;
  ro.dfs_tolerance = 1.0;
  const Vector expected = qubit(c0, st.outcome[0] ? -c1 : c1);
  ProtocolResult rt = retrieval_protocol(reg, *st.final_state, mode, ro, expected);
  rt.name = "round_trip";
  rt.outcome = st.outcome;
  rt.duration += st.duration;
  rt.pulse_count += st.pulse_count;
  rt.extra["storage_fidelity"] = st.fidelity_vs_ideal;
  return rt;
}

}  // namespace nvreg
