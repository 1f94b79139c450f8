#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nvreg/constants.hpp"
#include "nvreg/linalg.hpp"

namespace nvreg {

// Hyperfine field at a nucleus in the NV frame. a_perp >= 0, direction in azimuth.
struct HyperfineVector {
  double a_par = 0;   // rad/s, signed
  double a_perp = 0;  // rad/s
  double azimuth = 0; // rad in [0, 2pi)
};

struct NuclearSpin {
  HyperfineVector hyperfine;
  double larmor = 0;              // omega_j, rad/s
  std::optional<int> pair_tag;
  std::optional<Real3> position;  // nm, enables nuclear dipolar terms
};

struct RegisterOptions {
  double weak_field_factor = 10;
  double gamma_n = gamma_c13;
  bool designate_pair = false;  // nuclei 1 and 2 form the Larmor pair
};

class SpinRegister {
 public:
  SpinRegister() = default;
  SpinRegister(int ms, std::vector<NuclearSpin> nuclei, double b_field, double gamma_n)
      : ms_(ms), nuclei_(std::move(nuclei)), b_field_(b_field), gamma_n_(gamma_n) {}

  int ms() const { return ms_; }
  double b_field() const { return b_field_; }
  double gamma_n() const { return gamma_n_; }
  const std::vector<NuclearSpin>& nuclei() const { return nuclei_; }
  const NuclearSpin& nucleus(int j) const {  // 1-based
    if (j < 1 || j > size()) throw Error(Errc::index_out_of_range, "nucleus " + std::to_string(j));
    return nuclei_[j - 1];
  }
  int size() const { return static_cast<int>(nuclei_.size()); }
  int qubits() const { return size() + 1; }
  Eigen::Index dim() const { return Eigen::Index{1} << qubits(); }
  bool has_pair() const {
    return size() >= 2 && nuclei_[0].pair_tag && nuclei_[1].pair_tag && *nuclei_[0].pair_tag == *nuclei_[1].pair_tag;
  }

 private:
  int ms_ = -1;
  std::vector<NuclearSpin> nuclei_;
  double b_field_ = 0;
  double gamma_n_ = gamma_c13;
};

// omega_j = gamma_n B - ms A_par / 2
inline double larmor_frequency(const HyperfineVector& a, double b_field, int ms, double gamma_n = gamma_c13) {
  return gamma_n * b_field - 0.5 * ms * a.a_par;
}

inline SpinRegister build_register(const std::vector<HyperfineVector>& spec, double b_field, int ms,
                                   const RegisterOptions& opt = {},
                                   const std::vector<Real3>& positions = {}) {
  if (ms != 1 && ms != -1) throw Error(Errc::invalid_argument, "ms_branch must be +1 or -1");
  if (!(b_field > 0)) throw Error(Errc::invalid_argument, "b_field must be positive");
  if (!positions.empty() && positions.size() != spec.size())
    throw Error(Errc::dimension_mismatch, "positions and hyperfine lists differ in length");
  double max_perp = 0;
  for (const auto& h : spec) {
    if (h.a_perp < 0) throw Error(Errc::invalid_argument, "negative A_perp");
    max_perp = std::max(max_perp, h.a_perp);
  }
  if (opt.gamma_n * b_field < opt.weak_field_factor * max_perp)
    throw Error(Errc::weak_field_violation,
                "gamma_n B = " + std::to_string(to_kHz2pi(opt.gamma_n * b_field)) + " 2pi kHz is below " +
                    std::to_string(opt.weak_field_factor) + " x max A_perp");
  if (opt.designate_pair && spec.size() < 2) throw Error(Errc::no_pair_designated, "pair needs two nuclei");
  std::vector<NuclearSpin> nuc;
  for (std::size_t j = 0; j < spec.size(); ++j) {
    NuclearSpin n;
    n.hyperfine = spec[j];
    n.hyperfine.azimuth = std::fmod(std::fmod(spec[j].azimuth, two_pi) + two_pi, two_pi);
    n.larmor = larmor_frequency(spec[j], b_field, ms, opt.gamma_n);
    if (opt.designate_pair && j < 2) n.pair_tag = 0;
    if (!positions.empty()) n.position = positions[j];
    nuc.push_back(n);
  }
  return SpinRegister(ms, std::move(nuc), b_field, opt.gamma_n);
}

// ---------------------------------------------------------------- site operators

struct Site {
  int index = 0;  // 0 electron, 1..N nuclei
  static Site electron() { return {0}; }
  static Site nucleus(int j) { return {j}; }
};

struct Axis {
  enum Kind { x, y, z, azimuth } kind = z;
  double phi = 0;
  static Axis X() { return {x, 0}; }
  static Axis Y() { return {y, 0}; }
  static Axis Z() { return {z, 0}; }
  static Axis at(double p) { return {azimuth, p}; }
};

enum class Frame { local, global };

// Electron Pauli operators on {|0>, |ms>}; sigma_z = ms(|ms><ms| - |0><0|).
inline Matrix electron_pauli(int ms, Axis axis) {
  switch (axis.kind) {
    case Axis::x: return pauli::x();
    case Axis::y: return -double(ms) * pauli::y();
    case Axis::z: return -double(ms) * pauli::z();
    case Axis::azimuth:
      return std::cos(axis.phi) * pauli::x() - std::sin(axis.phi) * double(ms) * pauli::y();
  }
  return pauli::id();
}

// Spin-1/2 operator I^phi = cos(phi) I^x + sin(phi) I^y, standard basis (|up>, |down>).
inline Matrix spin_half_transverse(double phi) {
  return 0.5 * (std::cos(phi) * pauli::x() + std::sin(phi) * pauli::y());
}

inline Matrix nuclear_single(const NuclearSpin& n, Axis axis, Frame frame) {
  const double base = frame == Frame::local ? n.hyperfine.azimuth : 0.0;
  switch (axis.kind) {
    case Axis::x: return spin_half_transverse(base);
    case Axis::y: return spin_half_transverse(base + pi / 2);
    case Axis::z: return 0.5 * pauli::z();
    case Axis::azimuth: return spin_half_transverse(base + axis.phi);
  }
  return pauli::id();
}

inline Matrix site_operator(const SpinRegister& reg, Site site, Axis axis, Frame frame = Frame::local) {
  if (site.index < 0 || site.index > reg.size())
    throw Error(Errc::index_out_of_range, "site " + std::to_string(site.index));
  if (site.index == 0) return embed(electron_pauli(reg.ms(), axis), 0, reg.qubits());
  return embed(nuclear_single(reg.nucleus(site.index), axis, frame), site.index, reg.qubits());
}

// sigma_z eigenvalue of electron level e (0 -> |0>, 1 -> |ms>).
inline double electron_sign(int ms, int level) { return level == 0 ? -double(ms) : double(ms); }

// ---------------------------------------------------------------- states

class QuantumState {
 public:
  enum class Kind { pure, mixed };

  static QuantumState pure(Vector psi, double tol = 1e-10) {
    if (std::abs(psi.norm() - 1) > tol) throw Error(Errc::not_normalized, "state norm " + std::to_string(psi.norm()));
    QuantumState s;
    s.data_ = std::move(psi);
    return s;
  }
  static QuantumState mixed(Matrix rho, double tol = 1e-10) {
    if (rho.rows() != rho.cols()) throw Error(Errc::dimension_mismatch, "density matrix not square");
    if (std::abs(rho.trace().real() - 1) > tol || std::abs(rho.trace().imag()) > tol)
      throw Error(Errc::not_normalized, "density matrix trace");
    if (!is_hermitian(rho, tol)) throw Error(Errc::non_hermitian, "density matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    if (es.eigenvalues().minCoeff() < -tol) throw Error(Errc::invalid_argument, "density matrix not positive");
    QuantumState s;
    s.data_ = std::move(rho);
    return s;
  }
  static QuantumState maximally_mixed(Eigen::Index dim) {
    return mixed(Matrix::Identity(dim, dim) / double(dim));
  }

  Kind kind() const { return std::holds_alternative<Vector>(data_) ? Kind::pure : Kind::mixed; }
  const Vector& vector() const { return std::get<Vector>(data_); }
  Matrix density() const {
    if (kind() == Kind::mixed) return std::get<Matrix>(data_);
    const Vector& v = vector();
    return v * v.adjoint();
  }
  Eigen::Index dim() const { return kind() == Kind::pure ? vector().size() : std::get<Matrix>(data_).rows(); }

 private:
  QuantumState() = default;
  std::variant<Vector, Matrix> data_;
};

inline double expectation(const QuantumState& s, const Matrix& op) {
  if (op.rows() != s.dim() || op.cols() != s.dim()) throw Error(Errc::dimension_mismatch, "expectation");
  if (!is_hermitian(op)) throw Error(Errc::non_hermitian, "observable");
  cplx v;
  if (s.kind() == QuantumState::Kind::pure)
    v = s.vector().dot(op * s.vector());
  else
    v = (s.density() * op).trace();
  if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v))) throw Error(Errc::non_hermitian, "complex expectation");
  return v.real();
}

// Product basis vector from per-qubit levels (0 or 1), qubit 0 first.
inline Vector basis_state(const std::vector<int>& levels) {
  Eigen::Index idx = 0;
  for (int l : levels) idx = (idx << 1) | (l & 1);
  Vector v = Vector::Zero(Eigen::Index{1} << levels.size());
  v(idx) = 1;
  return v;
}

inline Vector qubit(cplx a, cplx b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace nvreg
