#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <utility>
#include <vector>

#include "nvreg/parallel.hpp"
#include "nvreg/random.hpp"
#include "nvreg/spin.hpp"

namespace nvreg {

enum class NoiseKind { electron_reset, electron_flip };
enum class Encoding { DFS, DPS };

// Stochastic electron events at exponentially distributed times. A reset puts
// the electron in |0> or |ms> with equal probability; a flip swaps the levels.
// A scheduled electron pi pulse ends every cycle.
struct NoiseChannel {
  NoiseKind kind = NoiseKind::electron_reset;
  double events_per_cycle = 0;  // mean event count per cycle
  double cycle_period = 10e-6;
};

struct CoherenceTrace {
  std::vector<std::pair<long long, double>> points;  // (cycle count N, coherence)
};

// Cycle counts 0, 1, 2, 5, 10, 20, 50, ... up to `cycles` (always included).
inline std::vector<long long> default_sample_cycles(long long cycles) {
  std::vector<long long> out{0};
  for (long long dec = 1; dec <= cycles; dec *= 10)
    for (long long m : {1, 2, 5})
      if (m * dec <= cycles) out.push_back(m * dec);
  if (out.back() != cycles) out.push_back(cycles);
  return out;
}

// Coherence 2|<up1 down2| rho |down1 up2>| of the pair state
// (|up1 down2> + |down1 up2>)/sqrt2 under the channel. The electron is kept as
// a level trajectory (secular hyperfine coupling: populations only), and the
// pair coherence picks up the phase difference of nuclei 1 and 2 while the
// electron sits in |ms>. Trajectories are averaged as density matrices.
inline CoherenceTrace coherence_under_noise(const SpinRegister& reg, Encoding encoded, const NoiseChannel& ch,
                                            long long cycles, int trajectories, std::uint64_t seed,
                                            std::vector<long long> sample_cycles = {}, unsigned workers = 0) {
  if (reg.size() < 2) throw Error(Errc::empty_register, "coherence needs two nuclei");
  if (cycles < 0 || trajectories < 1) throw Error(Errc::invalid_argument, "cycles >= 0 and trajectories >= 1 required");
  if (!(ch.cycle_period > 0) || ch.events_per_cycle < 0)
    throw Error(Errc::invalid_argument, "cycle_period > 0 and events_per_cycle >= 0 required");
  const double a1 = reg.nucleus(1).hyperfine.a_par, a2 = reg.nucleus(2).hyperfine.a_par;
  const double split = a1 - a2;
  if (encoded == Encoding::DFS && std::abs(split) > 1e-6 * std::max(std::abs(a1), std::abs(a2)))
    throw Error(Errc::invalid_argument, "DFS encoding needs equal A_par on nuclei 1 and 2");
  if (sample_cycles.empty()) sample_cycles = default_sample_cycles(cycles);
  std::sort(sample_cycles.begin(), sample_cycles.end());
  sample_cycles.erase(std::unique(sample_cycles.begin(), sample_cycles.end()), sample_cycles.end());
  if (sample_cycles.front() < 0 || sample_cycles.back() > cycles)
    throw Error(Errc::invalid_argument, "sample cycles outside [0, cycles]");

  const double rate = ch.events_per_cycle / ch.cycle_period;
  auto trajectory = [&](std::size_t t) {
    Rng rng(stream_seed(seed, t));
    std::vector<double> phase(sample_cycles.size());
    bool excited = false;  // electron in |ms>
    double phi = 0;
    std::size_t next = 0;
    for (long long n = 0; n <= cycles && next < sample_cycles.size(); ++n) {
      while (next < sample_cycles.size() && sample_cycles[next] == n) phase[next++] = phi;
      if (n == cycles) break;
      double t0 = 0;
      if (rate > 0) {
        for (;;) {
          const double dt = -std::log(1 - uniform01(rng)) / rate;
          if (t0 + dt >= ch.cycle_period) break;
          if (excited) phi += split * dt;
          t0 += dt;
          excited = ch.kind == NoiseKind::electron_reset ? uniform01(rng) < 0.5 : !excited;
        }
      }
      if (excited) phi += split * (ch.cycle_period - t0);
      excited = !excited;  // scheduled pi pulse
    }
    return phase;
  };
  const auto phases = parallel_map<std::vector<double>>(static_cast<std::size_t>(trajectories), trajectory, workers);
  CoherenceTrace tr;
  for (std::size_t k = 0; k < sample_cycles.size(); ++k) {
    std::complex<double> sum = 0;
    for (const auto& p : phases) sum += std::polar(1.0, p[k]);
    tr.points.emplace_back(sample_cycles[k], std::abs(sum) / trajectories);
  }
  return tr;
}

inline void write_trace(std::ostream& os, const CoherenceTrace& tr) {
  os << "N,coherence\n";
  os.precision(10);
  for (const auto& [n, c] : tr.points) os << n << ',' << c << '\n';
}

}  // namespace nvreg
