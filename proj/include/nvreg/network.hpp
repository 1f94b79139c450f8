#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "nvreg/constants.hpp"
#include "nvreg/linalg.hpp"
#include "nvreg/random.hpp"

namespace nvreg {

// Dense state vector of n qubits, qubit 0 most significant.
class QubitState {
 public:
  explicit QubitState(int n) : n_(n), v_(Vector::Zero(Eigen::Index{1} << n)) { v_(0) = 1; }
  QubitState(int n, Vector v) : n_(n), v_(std::move(v)) {
    if (v_.size() != (Eigen::Index{1} << n)) throw Error(Errc::dimension_mismatch, "state size");
  }

  int qubits() const { return n_; }
  const Vector& vector() const { return v_; }
  Vector& vector() { return v_; }

  void apply(int q, const Matrix& g) {
    const Eigen::Index stride = Eigen::Index{1} << (n_ - 1 - q);
    for (Eigen::Index i = 0; i < v_.size(); ++i) {
      if (i & stride) continue;
      const cplx a = v_(i), b = v_(i | stride);
      v_(i) = g(0, 0) * a + g(0, 1) * b;
      v_(i | stride) = g(1, 0) * a + g(1, 1) * b;
    }
  }

  void cz(int a, int b) {
    const Eigen::Index ma = Eigen::Index{1} << (n_ - 1 - a), mb = Eigen::Index{1} << (n_ - 1 - b);
    for (Eigen::Index i = 0; i < v_.size(); ++i)
      if ((i & ma) && (i & mb)) v_(i) = -v_(i);
  }

  double probability(int q, int value) const {
    const Eigen::Index m = Eigen::Index{1} << (n_ - 1 - q);
    double p = 0;
    for (Eigen::Index i = 0; i < v_.size(); ++i)
      if (bool(i & m) == bool(value)) p += std::norm(v_(i));
    return p;
  }

  // Project qubit q onto `value` and drop it; returns the branch probability.
  double measure_drop(int q, int value) {
    const Eigen::Index m = Eigen::Index{1} << (n_ - 1 - q);
    // Kept amplitudes in increasing index order keep the remaining qubit order.
    Vector out(v_.size() / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < v_.size(); ++i)
      if (bool(i & m) == bool(value)) out(k++) = v_(i);
    const double p = out.squaredNorm();
    v_ = p > 0 ? Vector(out / std::sqrt(p)) : out;
    --n_;
    return p;
  }

  // Append `k` qubits in |0> after the existing ones.
  void extend(int k) {
    Vector w = Vector::Zero(v_.size() << k);
    for (Eigen::Index i = 0; i < v_.size(); ++i) w(i << k) = v_(i);
    v_ = std::move(w);
    n_ += k;
  }

 private:
  int n_;
  Vector v_;
};

namespace gates {
inline Matrix h() { return (pauli::x() + pauli::z()) / std::sqrt(2.0); }
// Electron rotation H_x = exp(-i pi/4 sigma_x) used around the local CZ.
inline Matrix hx() { return expm_hermitian(pauli::x(), pi / 4); }
}  // namespace gates

// C~_z^{(n,m)} = sum_{mu nu} exp(i pi delta_{mu n} delta_{nu m}) |mu nu><mu nu|
inline Matrix remote_cz_formula(int n, int m) {
  Matrix g = Matrix::Identity(4, 4);
  g(2 * n + m, 2 * n + m) = -1;
  return g;
}

struct RemoteCzResult {
  Matrix gate;          // induced operator on (DFS_a, DFS_b), normalized to be unitary
  Vector output;        // gate applied to node_a (x) node_b
  double probability = 0;
};

namespace detail {

// Node-local protocol on qubits (e_a, d_a, e_b, d_b) with the Bell pair on
// the electrons: node a applies C_z then H_x, node b applies H_x C_z H_x.
inline void remote_cz_local_ops(QubitState& s, int ea, int da, int eb, int db) {
  s.cz(ea, da);
  s.apply(ea, gates::hx());
  s.apply(eb, gates::hx());
  s.cz(eb, db);
  s.apply(eb, gates::hx());
}

inline void prepare_bell(QubitState& s, int ea, int eb) {
  s.apply(ea, gates::h());
  // CNOT(ea -> eb) as H CZ H
  s.apply(eb, gates::h());
  s.cz(ea, eb);
  s.apply(eb, gates::h());
}

}  // namespace detail

inline RemoteCzResult remote_cz(const Vector& node_a_state, const Vector& node_b_state, std::pair<int, int> outcomes) {
  if (node_a_state.size() != 2 || node_b_state.size() != 2)
    throw Error(Errc::dimension_mismatch, "DFS node states are single logical qubits");
  const auto [n, m] = outcomes;
  if ((n != 0 && n != 1) || (m != 0 && m != 1)) throw Error(Errc::invalid_argument, "outcomes must be 0 or 1");
  RemoteCzResult r;
  r.gate = Matrix::Zero(4, 4);
  // Qubits: 0 = d_a, 1 = d_b, 2 = e_a, 3 = e_b.
  for (int col = 0; col < 4; ++col) {
    QubitState s(2);
    s.vector().setZero();
    s.vector()(col) = 1;
    s.extend(2);
    detail::prepare_bell(s, 2, 3);
    detail::remote_cz_local_ops(s, 2, 0, 3, 1);
    Vector v = s.vector();
    Vector out(4);
    for (int k = 0; k < 4; ++k) out(k) = v((k << 2) | (n << 1) | m);
    r.gate.col(col) = 2 * out;
  }
  const Vector in = kron(node_a_state, node_b_state);
  const Vector o = r.gate * in;
  r.probability = 0.25 * o.squaredNorm();
  r.output = o.normalized();
  return r;
}

// Local Z corrections (z_a, z_b) with (Z^z_a (x) Z^z_b) C~_z^{(n,m)} = CZ up to
// global phase, found by search.
inline std::pair<bool, bool> cz_correction(const Matrix& gate) {
  const Matrix cz = remote_cz_formula(1, 1);
  for (int za = 0; za < 2; ++za)
    for (int zb = 0; zb < 2; ++zb) {
      const Matrix c = kron(za ? pauli::z() : pauli::id(), zb ? pauli::z() : pauli::id());
      if (gate_fidelity(c * gate, cz) > 1 - 1e-12) return {bool(za), bool(zb)};
    }
  throw Error(Errc::unsolvable, "no local Z correction maps the gate to CZ");
}

struct GraphStateOptions {
  std::uint64_t seed = 1;
  double bell_depolarizing = 0;  // probability that the Bell pair is replaced by the maximally mixed state
  std::optional<std::pair<int, int>> forced_outcome;
};

struct GraphStateResult {
  Vector state;
  double fidelity = 0;
  std::vector<std::pair<int, int>> outcomes;
};

using Edge = std::pair<int, int>;

inline Vector ideal_graph_state(int n, const std::vector<Edge>& edges) {
  QubitState s(n);
  for (int q = 0; q < n; ++q) s.apply(q, gates::h());
  for (const auto& [a, b] : edges) s.cz(a, b);
  return s.vector();
}

inline double stabilizer_expectation(const Vector& psi, int n, const std::vector<Edge>& edges, int a) {
  QubitState s(n, psi);
  s.apply(a, pauli::x());
  for (const auto& [u, v] : edges) {
    if (u == a) s.apply(v, pauli::z());
    if (v == a) s.apply(u, pauli::z());
  }
  return psi.dot(s.vector()).real();
}

// Nodes start in |+~>; each edge runs the remote-CZ protocol on the full
// register with Born-sampled electron outcomes, then the local Z corrections.
inline GraphStateResult graph_state_build(const std::vector<Edge>& edges, int node_count, const GraphStateOptions& opt = {}) {
  if (node_count > 10) throw Error(Errc::too_many_nodes, std::to_string(node_count) + " nodes exceed the cap of 10");
  if (node_count < 1) throw Error(Errc::invalid_argument, "need at least one node");
  for (const auto& [a, b] : edges)
    if (a < 0 || b < 0 || a >= node_count || b >= node_count || a == b)
      throw Error(Errc::index_out_of_range, "edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
  Rng rng(stream_seed(opt.seed, 0));
  QubitState s(node_count);
  for (int q = 0; q < node_count; ++q) s.apply(q, gates::h());
  GraphStateResult res;
  for (const auto& [a, b] : edges) {
    s.extend(2);
    const int ea = node_count, eb = node_count + 1;
    detail::prepare_bell(s, ea, eb);
    if (opt.bell_depolarizing > 0 && uniform01(rng) < opt.bell_depolarizing) {
      const int k = static_cast<int>(uniform01(rng) * 4);
      if (k == 1) s.apply(eb, pauli::x());
      if (k == 2) s.apply(eb, pauli::y());
      if (k == 3) s.apply(eb, pauli::z());
    }
    detail::remote_cz_local_ops(s, ea, a, eb, b);
    int n = 0, m = 0;
    if (opt.forced_outcome) {
      std::tie(n, m) = *opt.forced_outcome;
    } else {
      n = uniform01(rng) < s.probability(ea, 1) ? 1 : 0;
    }
    s.measure_drop(ea, n);
    if (!opt.forced_outcome) m = uniform01(rng) < s.probability(eb - 1, 1) ? 1 : 0;
    s.measure_drop(eb - 1, m);
    const auto [za, zb] = cz_correction(remote_cz_formula(n, m));
    if (za) s.apply(a, pauli::z());
    if (zb) s.apply(b, pauli::z());
    res.outcomes.emplace_back(n, m);
  }
  res.state = s.vector();
  res.fidelity = state_fidelity(res.state, ideal_graph_state(node_count, edges));
  return res;
}

// Von Neumann entropy (bits) of qubit subset `keep` of a pure state.
inline double entanglement_entropy(const Vector& psi, int n, const std::vector<int>& keep) {
  const Matrix rho = reduced_density(psi, n, keep);
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
  double s = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l > 1e-15) s -= l * std::log2(l);
  }
  return s;
}

}  // namespace nvreg
