#include "commands.hpp"

#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "config.hpp"
#include "json.hpp"
#include "nvreg/nvreg.hpp"

namespace nvreg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double deg = pi / 180;

// ---------------------------------------------------------------- plumbing

struct Context {
  std::uint64_t seed = 1;
  fs::path out;
  unsigned workers = 0;
  RunResult result;

  fs::path write(const std::string& name, const std::string& content) {
    fs::create_directories(out);
    const fs::path p = out / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(Errc::invalid_argument, "cannot write " + p.string());
    f << content;
    result.artifacts.push_back(p.string());
    return p;
  }
};

Context make_context(const Section& root, const RunOptions& o, const std::string& sub) {
  Context c;
  c.seed = o.seed ? *o.seed : root.get<std::uint64_t>("seed", 1);
  c.out = o.output_dir ? fs::path(*o.output_dir) : fs::path(root.get<std::string>("output_dir", "out/" + sub));
  c.workers = root.get<unsigned>("workers", 0);
  default_workers() = c.workers;
  return c;
}

std::string num(double v, int prec = 10) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

Real3 vec3(const Section& s, const std::string& key) {
  const auto v = s.get<std::vector<double>>(key);
  if (v.size() != 3) s.fail(key, "expected three numbers");
  return Real3(v[0], v[1], v[2]);
}

std::vector<Real3> vec3_list(const Section& s, const std::string& key) {
  const YAML::Node n = s.node(key);
  if (!n || !n.IsSequence()) s.fail(key, "expected a list of [x, y, z] triples");
  std::vector<Real3> out;
  for (const auto& item : n) {
    std::vector<double> v;
    try {
      v = item.as<std::vector<double>>();
    } catch (const YAML::Exception&) {
      s.fail(key, "entry at line " + std::to_string(item.Mark().line + 1) + " is not a list of numbers");
    }
    if (v.size() != 3) s.fail(key, "entry at line " + std::to_string(item.Mark().line + 1) + " needs three numbers");
    out.emplace_back(v[0], v[1], v[2]);
  }
  return out;
}

cplx complex_of(const Section& s, const std::string& key, cplx fallback) {
  if (!s.has(key)) return fallback;
  const auto v = s.get<std::vector<double>>(key);
  if (v.size() != 2) s.fail(key, "expected [re, im]");
  return {v[0], v[1]};
}

template <class E>
E choice(const Section& s, const std::string& key, const std::map<std::string, E>& options, E fallback) {
  if (!s.has(key)) return fallback;
  const std::string v = s.get<std::string>(key);
  const auto it = options.find(v);
  if (it == options.end()) {
    std::string list;
    for (const auto& [k, e] : options) list += (list.empty() ? "" : ", ") + k;
    s.fail(key, "'" + v + "' is not one of " + list);
  }
  return it->second;
}

// ---------------------------------------------------------------- shared sections

SpinRegister read_register(const Section& s) {
  s.allow({"b_field_T", "ms_branch", "weak_field_factor", "designate_pair", "nv_axis", "min_distance_nm", "nuclei"});
  const double b = s.get<double>("b_field_T");
  const int ms = s.get<int>("ms_branch", -1);
  RegisterOptions ro;
  ro.weak_field_factor = s.get<double>("weak_field_factor", 10.0);
  ro.designate_pair = s.get<bool>("designate_pair", false);
  const Real3 axis = s.has("nv_axis") ? vec3(s, "nv_axis").normalized() : default_nv_axis();
  const double dmin = s.get<double>("min_distance_nm", default_min_distance_nm);
  std::vector<HyperfineVector> spec;
  std::vector<Real3> pos;
  bool all_pos = true;
  if (s.has("nuclei")) {
    for (const auto& n : s.child_list("nuclei")) {
      n.allow({"position_nm", "a_par_2pikHz", "a_perp_2pikHz", "azimuth_deg"});
      if (n.has("position_nm")) {
        if (n.has("a_par_2pikHz") || n.has("a_perp_2pikHz") || n.has("azimuth_deg"))
          n.fail("position_nm", "give either position_nm or explicit hyperfine values");
        const Real3 p = vec3(n, "position_nm");
        spec.push_back(hyperfine_vector(p, axis, dmin));
        pos.push_back(p);
      } else {
        spec.push_back({kHz2pi(n.get<double>("a_par_2pikHz")), kHz2pi(n.get<double>("a_perp_2pikHz")),
                        n.get<double>("azimuth_deg", 0.0) * deg});
        all_pos = false;
      }
    }
  }
  return build_register(spec, b, ms, ro, all_pos ? pos : std::vector<Real3>{});
}

SequenceParams read_sequence(const std::optional<Section>& s) {
  SequenceParams sp;
  if (!s) return sp;
  s->allow({"interaction_harmonic", "interaction_pulses", "storage_harmonic", "storage_pulses", "pi_window_pulses",
            "pi_harmonic", "rf_rabi_2pikHz", "mw_rabi_2piMHz", "finite_pulses", "dee_pulses", "dee_tau_us", "max_reps",
            "rf_steps_per_period", "dipolar"});
  sp.interaction_harmonic = s->get<int>("interaction_harmonic", sp.interaction_harmonic);
  sp.interaction_pulses = s->get<int>("interaction_pulses", sp.interaction_pulses);
  sp.storage_harmonic = s->get<int>("storage_harmonic", sp.storage_harmonic);
  sp.storage_pulses = s->get<int>("storage_pulses", sp.storage_pulses);
  sp.pi_window_pulses = s->get<int>("pi_window_pulses", sp.pi_window_pulses);
  sp.pi_harmonic = s->get<int>("pi_harmonic", sp.pi_harmonic);
  sp.rf_rabi = kHz2pi(s->get<double>("rf_rabi_2pikHz", to_kHz2pi(sp.rf_rabi)));
  sp.mw_rabi = MHz2pi(s->get<double>("mw_rabi_2piMHz", sp.mw_rabi / MHz2pi(1)));
  sp.finite_pulses = s->get<bool>("finite_pulses", sp.finite_pulses);
  sp.dee_pulses = s->get<int>("dee_pulses", sp.dee_pulses);
  sp.dee_tau = us(s->get<double>("dee_tau_us", sp.dee_tau / us(1)));
  sp.max_reps = s->get<int>("max_reps", sp.max_reps);
  sp.rf_steps_per_period = s->get<int>("rf_steps_per_period", sp.rf_steps_per_period);
  sp.dipolar = s->get<bool>("dipolar", sp.dipolar);
  return sp;
}

// Static pulse errors; detuning as a fraction of the microwave Rabi frequency.
std::optional<PulseErrorModel> read_errors(const std::optional<Section>& s, const SequenceParams& sp) {
  if (!s) return std::nullopt;
  s->allow({"amplitude_frac", "detuning_frac"});
  return PulseErrorModel::with_rabi(sp.mw_rabi, s->get<double>("amplitude_frac", 0.0),
                                    s->get<double>("detuning_frac", 0.0) * sp.mw_rabi);
}

const std::map<std::string, Mode> kModes{{"ideal", Mode::ideal}, {"time_domain", Mode::time_domain}};
const std::map<std::string, Measurement> kMeasurements{
    {"sample", Measurement::sample}, {"postselect_0", Measurement::postselect_0}, {"postselect_1", Measurement::postselect_1}};

json plan_json(const SelectiveGatePlan& p) {
  return {{"phi1_deg", p.phi1 / deg}, {"phi2_deg", p.phi2 / deg}, {"alpha_deg", p.alpha / deg},
          {"theta_rad", p.theta},     {"beta_deg", p.beta / deg},   {"reps", p.reps},
          {"chi_rad", p.chi},         {"xi", p.xi},                 {"mu_theta", p.mu_theta},
          {"r_x", p.r_x},             {"r_y", p.r_y},               {"target", p.target}};
}

json result_json(const ProtocolResult& r) {
  json j{{"name", r.name},
         {"fidelity", r.fidelity_vs_ideal},
         {"duration_us", r.duration / us(1)},
         {"pulse_count", r.pulse_count},
         {"outcome", r.outcome}};
  if (r.plan) j["plan"] = plan_json(*r.plan);
  for (const auto& [k, v] : r.extra) j["extra"][k] = v;
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- hyperfine

RunResult cmd_hyperfine(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "hyperfine"});
  Context ctx = make_context(root, o, "hyperfine");
  const Section h = root.child("hyperfine");
  h.allow({"positions_nm", "nv_axis", "min_distance_nm", "sample"});
  const Real3 axis = h.has("nv_axis") ? vec3(h, "nv_axis").normalized() : default_nv_axis();
  const double dmin = h.get<double>("min_distance_nm", default_min_distance_nm);
  std::ostringstream csv;
  csv << "x_nm,y_nm,z_nm,a_par_2pikHz,a_perp_2pikHz,azimuth_rad\n";
  std::vector<HyperfineVector> hv;
  if (h.has("positions_nm")) {
    for (const auto& p : vec3_list(h, "positions_nm")) {
      hv.push_back(hyperfine_vector(p, axis, dmin));
      csv << num(p.x()) << ',' << num(p.y()) << ',' << num(p.z()) << ',' << num(to_kHz2pi(hv.back().a_par)) << ','
          << num(to_kHz2pi(hv.back().a_perp)) << ',' << num(hv.back().azimuth) << '\n';
    }
  }
  const fs::path path = ctx.write("hyperfine.csv", csv.str());
  std::string extra;
  if (const auto smp = h.maybe_child("sample")) {
    smp->allow({"radius_nm", "abundance"});
    OccupationOptions occ;
    occ.nv_axis = axis;
    occ.min_distance_nm = dmin;
    const auto bath = sample_occupation(generate_sites(smp->get<double>("radius_nm")), smp->get<double>("abundance"),
                                        stream_seed(ctx.seed, 0), occ);
    std::ostringstream b;
    write_bath(b, bath);
    ctx.write("bath.txt", b.str());
    extra = ", sampled bath of " + std::to_string(bath.nuclei.size()) + " nuclei";
  }
  std::ostringstream s;
  s << "hyperfine: " << hv.size() << " nuclei";
  if (!hv.empty())
    s << ", nucleus 1 A_par/2pi = " << num(to_kHz2pi(hv[0].a_par), 6)
      << " kHz, A_perp/2pi = " << num(to_kHz2pi(hv[0].a_perp), 6) << " kHz";
  s << extra << " -> " << path.string();
  ctx.result.summary = s.str();
  return ctx.result;
}

// ---------------------------------------------------------------- census

RunResult cmd_census(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "census"});
  Context ctx = make_context(root, o, "census");
  const Section c = root.child("census");
  c.allow({"samples", "abundance", "radius_nm", "delta_min_2pikHz", "a_perp_min_2pikHz", "g_max_2pikHz",
           "require_angle_constraint", "reps_for_angle", "degeneracy_tol"});
  CensusConfig cfg;
  cfg.samples = c.get<long long>("samples", cfg.samples);
  cfg.abundance = c.get<double>("abundance", cfg.abundance);
  cfg.radius_nm = c.get<double>("radius_nm", cfg.radius_nm);
  auto grid = [&](const char* key, std::vector<double> fallback) {
    std::vector<double> v = c.has(key) ? c.get<std::vector<double>>(key) : fallback;
    for (double& x : v) x = kHz2pi(x);
    if (v.empty()) c.fail(key, "grid is empty");
    if (!std::is_sorted(v.begin(), v.end())) c.fail(key, "grid must be sorted ascending");
    return v;
  };
  cfg.delta_min_grid = grid("delta_min_2pikHz", {2});
  cfg.a_perp_min_grid = grid("a_perp_min_2pikHz", {10});
  cfg.g_max = kHz2pi(c.get<double>("g_max_2pikHz", 0.05));
  cfg.require_angle_constraint = c.get<bool>("require_angle_constraint", false);
  cfg.reps_for_angle = c.get<int>("reps_for_angle", 1);
  cfg.degeneracy_tol = c.get<double>("degeneracy_tol", cfg.degeneracy_tol);
  cfg.workers = ctx.workers;
  if (cfg.samples < 1) c.fail("samples", "must be >= 1");
  const CensusReport rep = run_census(cfg, ctx.seed);
  std::ostringstream csv;
  write_census(csv, rep);
  const fs::path path = ctx.write("census.csv", csv.str());
  const auto& e = rep.entries.front();
  ctx.result.summary = "census: P(pair) = " + num(e.probability, 6) + " +- " + num(e.ci95, 3) + " at delta_min = " +
                       num(to_kHz2pi(e.delta_min), 4) + " 2pi kHz, A_perp_min = " + num(to_kHz2pi(e.a_perp_min), 4) +
                       " 2pi kHz over " + std::to_string(cfg.samples) + " samples -> " + path.string();
  return ctx.result;
}

// ---------------------------------------------------------------- gate-sim

RunResult cmd_gate_sim(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "register", "sequence", "pulse_errors", "gate"});
  Context ctx = make_context(root, o, "gate-sim");
  const SpinRegister reg = read_register(root.child("register"));
  const SequenceParams sp = read_sequence(root.maybe_child("sequence"));
  const auto errors = read_errors(root.maybe_child("pulse_errors"), sp);
  const Section g = root.child("gate");
  g.allow({"kind", "mode", "target", "max_reps", "phi_deg", "tau_us", "delta_2pikHz", "theta_deg", "harmonic", "pulses"});
  const std::string kind = g.get<std::string>("kind");
  const Mode mode = choice(g, "mode", kModes, Mode::ideal);
  const int target = g.get<int>("target", 1);
  const int max_reps = g.get<int>("max_reps", sp.max_reps);
  json rep{{"gate", kind}, {"mode", mode == Mode::ideal ? "ideal" : "time_domain"}};
  double fid = 0;

  auto plan = [&] { return with_beta(plan_for_register(reg, max_reps, target), reg); };
  if (kind == "r_pi") {
    const SelectiveGatePlan p = plan();
    if (mode == Mode::ideal) {
      fid = fidelity_on(reg, r_pi_ideal(p, reg), pi_rotation(reg, target, p.beta), {1, 2});
      rep["plan"] = plan_json(p);
      rep["duration_us"] = r_pi_duration(reg, time_domain_plan(p, reg, sp), sp) / us(1);
      rep["pulse_count"] = r_pi_pulse_count(p, sp);
    } else {
      const ProtocolResult r = r_pi_time_domain(p, reg, sp, errors);
      rep.update(result_json(r));
      fid = r.fidelity_vs_ideal;
    }
  } else if (kind == "u_int") {
    const double theta = g.get<double>("theta_deg", 90.0) * deg;
    const int k = g.get<int>("harmonic", sp.interaction_harmonic);
    const int pulses = g.get<int>("pulses", sp.interaction_pulses);
    const double th = reachable_theta(reg, theta, k, pulses);
    const PulseSequence seq = interaction_sequence(reg, th, k, pulses, sp, errors);
    std::ostringstream ev;
    write_events(ev, seq);
    ctx.write("sequence.txt", ev.str());
    if (mode == Mode::ideal) {
      fid = 1;
    } else {
      const FidelityReport f = time_domain_equivalence(reg, seq, th, engine_options(sp));
      fid = f.fidelity;
    }
    rep["theta_rad"] = th;
    rep["f_k"] = seq.f_k_target;
    rep["harmonic"] = k;
    rep["duration_us"] = seq.total_time / us(1);
    rep["pulse_count"] = static_cast<int>(seq.pulses.size());
  } else if (kind == "z_rotation") {
    const SelectiveGatePlan p = plan();
    const double phi = g.get<double>("phi_deg", 90.0) * deg;
    const Matrix ideal = expm_hermitian(site_operator(reg, Site::nucleus(target), Axis::Z()), -phi);
    fid = gate_fidelity(z_rotation(reg, phi, p), ideal);
    rep["plan"] = plan_json(p);
    rep["phi_deg"] = phi / deg;
  } else if (kind == "u_ent") {
    const SelectiveGatePlan p = plan();
    const double a_par = std::abs(reg.nucleus(target).hyperfine.a_par);
    const double tau = g.has("tau_us") ? us(g.get<double>("tau_us")) : pi / (2 * a_par);
    const double delta = g.has("delta_2pikHz") ? kHz2pi(g.get<double>("delta_2pikHz")) : pi / (4 * tau);
    const Matrix u = u_ent_prime(reg, tau, delta, p);
    const std::vector<int> pair{1, 2};
    fid = fidelity_on(reg, u, u_z_target(reg, tau, delta, target), pair);
    rep["plan"] = plan_json(p);
    rep["tau_us"] = tau / us(1);
    rep["delta_2pikHz"] = to_kHz2pi(delta);
  } else {
    g.fail("kind", "'" + kind + "' is not one of r_pi, u_int, z_rotation, u_ent");
  }
  rep["fidelity"] = fid;
  const fs::path path = ctx.write("report.json", dump(rep));
  ctx.result.summary = "gate-sim: " + kind + " fidelity " + num(fid, 8) + " -> " + path.string();
  return ctx.result;
}

// ---------------------------------------------------------------- protocol-sim

Vector random_qubit(Rng& rng) {
  std::normal_distribution<double> n;  // only the seeded stream matters for replay
  Vector v(2);
  v << cplx(n(rng), n(rng)), cplx(n(rng), n(rng));
  return v.normalized();
}

RunResult cmd_protocol_sim(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "register", "sequence", "pulse_errors", "protocol", "noise"});
  Context ctx = make_context(root, o, "protocol-sim");
  const Section p = root.child("protocol");
  p.allow({"kind", "mode", "measurement", "c0", "c1", "random_states", "outcomes", "node_a", "node_b", "nodes", "edges",
           "bell_depolarizing"});
  const std::string kind = p.get<std::string>("kind");
  json rep{{"protocol", kind}, {"seed", ctx.seed}};
  std::string metric;

  if (kind == "remote_cz" || kind == "graph_state") {
    if (kind == "remote_cz") {
      const auto oc = p.get<std::vector<int>>("outcomes", {1, 1});
      if (oc.size() != 2) p.fail("outcomes", "expected [n, m]");
      auto node = [&](const char* key) {
        Vector v(2);
        v << complex_of(p, key, 1 / std::sqrt(2.0)), 1 / std::sqrt(2.0);
        if (p.has(key)) {
          const auto a = p.get<std::vector<double>>(key);
          if (a.size() != 4) p.fail(key, "expected [re0, im0, re1, im1]");
          v << cplx(a[0], a[1]), cplx(a[2], a[3]);
        }
        return Vector(v.normalized());
      };
      const RemoteCzResult r = remote_cz(node("node_a"), node("node_b"), {oc[0], oc[1]});
      const Matrix ref = remote_cz_formula(oc[0], oc[1]);
      const cplx g = (ref.adjoint() * r.gate).trace() / 4.0;  // global phase
      const double err = (r.gate - g / std::abs(g) * ref).cwiseAbs().maxCoeff();
      const auto [za, zb] = cz_correction(r.gate);
      rep["outcomes"] = oc;
      rep["probability"] = r.probability;
      rep["max_deviation_from_formula"] = err;
      rep["z_correction"] = {za, zb};
      rep["entanglement_entropy_bits"] = entanglement_entropy(r.output, 2, {0});
      metric = "max deviation from C_z formula " + num(err, 3);
    } else {
      const int n = p.get<int>("nodes");
      std::vector<Edge> edges;
      const YAML::Node en = p.node("edges");
      if (!en || !en.IsSequence()) p.fail("edges", "expected a list of [a, b] pairs");
      for (const auto& e : en) {
        std::vector<int> ab;
        try {
          ab = e.as<std::vector<int>>();
        } catch (const YAML::Exception&) {
          p.fail("edges", "entry at line " + std::to_string(e.Mark().line + 1) + " is not [a, b]");
        }
        if (ab.size() != 2) p.fail("edges", "entry at line " + std::to_string(e.Mark().line + 1) + " is not [a, b]");
        edges.emplace_back(ab[0], ab[1]);
      }
      GraphStateOptions go;
      go.seed = ctx.seed;
      go.bell_depolarizing = p.get<double>("bell_depolarizing", 0.0);
      const GraphStateResult g = graph_state_build(edges, n, go);
      json stab = json::array();
      for (int a = 0; a < n; ++a) stab.push_back(stabilizer_expectation(g.state, n, edges, a));
      rep["nodes"] = n;
      rep["fidelity"] = g.fidelity;
      rep["stabilizers"] = stab;
      json oc = json::array();
      for (const auto& [a, b] : g.outcomes) oc.push_back({a, b});
      rep["outcomes"] = oc;
      metric = "graph-state fidelity " + num(g.fidelity, 10);
    }
  } else if (kind == "coherence") {
    const SpinRegister reg = read_register(root.child("register"));
    const Section nz = root.child("noise");
    nz.allow({"kind", "events_per_cycle", "cycle_period_us", "cycles", "trajectories", "encoding", "sample_cycles"});
    NoiseChannel ch;
    ch.kind = choice(nz, "kind", std::map<std::string, NoiseKind>{{"electron_reset", NoiseKind::electron_reset},
                                                                  {"electron_flip", NoiseKind::electron_flip}},
                     NoiseKind::electron_reset);
    ch.events_per_cycle = nz.get<double>("events_per_cycle");
    ch.cycle_period = us(nz.get<double>("cycle_period_us", 10.0));
    const Encoding enc =
        choice(nz, "encoding", std::map<std::string, Encoding>{{"DFS", Encoding::DFS}, {"DPS", Encoding::DPS}}, Encoding::DFS);
    std::vector<long long> samples;
    if (nz.has("sample_cycles"))
      for (int v : nz.get<std::vector<int>>("sample_cycles")) samples.push_back(v);
    const CoherenceTrace tr = coherence_under_noise(reg, enc, ch, nz.get<long long>("cycles"),
                                                    nz.get<int>("trajectories", 500), ctx.seed, samples, ctx.workers);
    std::ostringstream csv;
    write_trace(csv, tr);
    const fs::path path = ctx.write("coherence.csv", csv.str());
    ctx.result.summary = "protocol-sim: coherence " + num(tr.points.back().second, 6) + " after " +
                         std::to_string(tr.points.back().first) + " cycles -> " + path.string();
    return ctx.result;
  } else {
    const SpinRegister reg = read_register(root.child("register"));
    ProtocolOptions po;
    po.sequence = read_sequence(root.maybe_child("sequence"));
    po.errors = read_errors(root.maybe_child("pulse_errors"), po.sequence);
    po.measurement = choice(p, "measurement", kMeasurements, Measurement::sample);
    po.seed = ctx.seed;
    const Mode mode = choice(p, "mode", kModes, Mode::ideal);
    auto run_one = [&](cplx c0, cplx c1, std::uint64_t seed) {
      ProtocolOptions q = po;
      q.seed = seed;
      if (kind == "storage") return storage_protocol(reg, c0, c1, mode, q);
      if (kind == "round_trip") return round_trip(reg, c0, c1, mode, q);
      if (kind == "retrieval") {
        const Vector dfs = detail::pair_state(reg, c0, c1);
        return retrieval_protocol(reg, QuantumState::pure(dfs), mode, q);
      }
      p.fail("kind", "'" + kind + "' is not one of storage, retrieval, round_trip, remote_cz, graph_state, coherence");
    };
    const int nrand = p.get<int>("random_states", 0);
    if (nrand > 0) {
      const auto res = parallel_map<ProtocolResult>(
          static_cast<std::size_t>(nrand),
          [&](std::size_t i) {
            Rng rng(stream_seed(ctx.seed, i));
            const Vector c = random_qubit(rng);
            return run_one(c(0), c(1), stream_seed(ctx.seed, 1000000 + i));
          },
          ctx.workers);
      double worst = 1;
      json runs = json::array();
      for (const auto& r : res) {
        worst = std::min(worst, r.fidelity_vs_ideal);
        runs.push_back(result_json(r));
      }
      rep["runs"] = runs;
      rep["worst_fidelity"] = worst;
      rep["worst_infidelity"] = 1 - worst;
      metric = "worst fidelity over " + std::to_string(nrand) + " random states " + num(worst, 12);
    } else {
      const cplx c0 = complex_of(p, "c0", 1 / std::sqrt(2.0)), c1 = complex_of(p, "c1", 1 / std::sqrt(2.0));
      const ProtocolResult r = run_one(c0, c1, ctx.seed);
      rep.update(result_json(r));
      metric = kind + " fidelity " + num(r.fidelity_vs_ideal, 10);
    }
    rep["mode"] = mode == Mode::ideal ? "ideal" : "time_domain";
  }
  const fs::path path = ctx.write("report.json", dump(rep));
  ctx.result.summary = "protocol-sim: " + metric + " -> " + path.string();
  return ctx.result;
}

// ---------------------------------------------------------------- robustness-scan

RunResult cmd_robustness(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "register", "sequence", "scan"});
  Context ctx = make_context(root, o, "robustness-scan");
  const SpinRegister reg = read_register(root.child("register"));
  const SequenceParams sp = read_sequence(root.maybe_child("sequence"));
  const Section s = root.child("scan");
  s.allow({"target", "amplitude_frac", "detuning_frac", "c0", "c1", "max_reps", "theta_deg", "harmonic", "pulses"});
  const std::string target = s.get<std::string>("target");
  const std::vector<double> amp = read_grid(s.child("amplitude_frac"));
  const std::vector<double> det = read_grid(s.child("detuning_frac"));
  const cplx c0 = complex_of(s, "c0", 1 / std::sqrt(2.0)), c1 = complex_of(s, "c1", 1 / std::sqrt(2.0));
  const int max_reps = s.get<int>("max_reps", sp.max_reps);
  std::optional<SelectiveGatePlan> plan;
  if (target == "r_pi") plan = with_beta(plan_for_register(reg, max_reps, 1), reg);
  else if (target != "storage" && target != "round_trip" && target != "u_int")
    s.fail("target", "'" + target + "' is not one of r_pi, storage, round_trip, u_int");
  const double theta = s.get<double>("theta_deg", 90.0) * deg;
  const int k = s.get<int>("harmonic", sp.interaction_harmonic);
  const int pulses = s.get<int>("pulses", sp.interaction_pulses);

  const std::size_t n = amp.size() * det.size();
  const auto fid = parallel_map<double>(
      n,
      [&](std::size_t i) {
        const auto err = PulseErrorModel::with_rabi(sp.mw_rabi, amp[i / det.size()], det[i % det.size()] * sp.mw_rabi);
        if (target == "r_pi") return r_pi_time_domain(*plan, reg, sp, err).fidelity_vs_ideal;
        if (target == "u_int") {
          const double th = reachable_theta(reg, theta, k, pulses);
          return time_domain_equivalence(reg, interaction_sequence(reg, th, k, pulses, sp, err), th, engine_options(sp))
              .fidelity;
        }
        ProtocolOptions po;
        po.sequence = sp;
        po.errors = err;
        po.measurement = Measurement::postselect_0;
        return target == "storage" ? storage_protocol(reg, c0, c1, Mode::time_domain, po).fidelity_vs_ideal
                                   : round_trip(reg, c0, c1, Mode::time_domain, po).fidelity_vs_ideal;
      },
      ctx.workers);
  std::ostringstream csv;
  csv << "amplitude_frac,detuning_frac,detuning_2piMHz,fidelity\n";
  double worst = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = amp[i / det.size()], d = det[i % det.size()];
    csv << num(a) << ',' << num(d) << ',' << num(d * sp.mw_rabi / MHz2pi(1)) << ',' << num(fid[i], 12) << '\n';
    worst = std::min(worst, fid[i]);
  }
  const fs::path path = ctx.write("robustness.csv", csv.str());
  ctx.result.summary = "robustness-scan: " + target + " worst fidelity " + num(worst, 8) + " over " +
                       std::to_string(n) + " grid points -> " + path.string();
  return ctx.result;
}

// ---------------------------------------------------------------- dee-spectrum

RunResult cmd_dee(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "register", "dee", "pulse_errors", "sequence"});
  Context ctx = make_context(root, o, "dee-spectrum");
  const SpinRegister reg = read_register(root.child("register"));
  const SequenceParams sp = read_sequence(root.maybe_child("sequence"));
  const Section d = root.child("dee");
  d.allow({"omega_dd_2pikHz", "offset_from_larmor_2pikHz", "interaction_time_us", "delay_time_us", "delay_pulses",
           "harmonic", "references"});
  DeeParams dp;
  dp.interaction_time = us(d.get<double>("interaction_time_us", 17.6));
  dp.delay_time = us(d.get<double>("delay_time_us", 673.0));
  dp.delay_pulses = d.get<int>("delay_pulses", 200);
  dp.harmonic = d.get<int>("harmonic", 1);
  dp.errors = read_errors(root.maybe_child("pulse_errors"), sp);
  dp.workers = ctx.workers;
  std::vector<double> grid;
  if (d.has("omega_dd_2pikHz") == d.has("offset_from_larmor_2pikHz"))
    d.fail("omega_dd_2pikHz", "give exactly one of omega_dd_2pikHz or offset_from_larmor_2pikHz");
  if (d.has("omega_dd_2pikHz")) {
    for (double v : read_grid(d.child("omega_dd_2pikHz"))) grid.push_back(kHz2pi(v));
  } else {
    if (reg.size() == 0) d.fail("offset_from_larmor_2pikHz", "register has no nucleus to offset from");
    const double w = reg.nucleus(1).larmor / dp.harmonic;
    for (double v : read_grid(d.child("offset_from_larmor_2pikHz"))) grid.push_back(w + kHz2pi(v));
  }
  const auto sig = dee_spectrum(reg, grid, dp);
  const bool refs = d.get<bool>("references", false);
  std::vector<ScanPoint> one, two;
  if (refs) {
    if (reg.size() < 2) d.fail("references", "reference curves use nuclei 1 and 2 of the register");
    std::vector<HyperfineVector> h1{reg.nucleus(1).hyperfine}, h2{reg.nucleus(1).hyperfine, reg.nucleus(2).hyperfine};
    RegisterOptions ro;
    ro.weak_field_factor = 0;
    ro.gamma_n = reg.gamma_n();
    one = dee_spectrum(build_register(h1, reg.b_field(), reg.ms(), ro), grid, dp);
    two = dee_spectrum(build_register(h2, reg.b_field(), reg.ms(), ro), grid, dp);
  }
  std::ostringstream csv;
  csv << "omega_dd_2pikHz,signal" << (refs ? ",one_spin,two_spin" : "") << '\n';
  std::size_t imin = 0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    csv << num(to_kHz2pi(grid[i]), 12) << ',' << num(sig[i].signal, 10);
    if (refs) csv << ',' << num(one[i].signal, 10) << ',' << num(two[i].signal, 10);
    csv << '\n';
    if (sig[i].signal < sig[imin].signal) imin = i;
  }
  const fs::path path = ctx.write("dee_spectrum.csv", csv.str());
  ctx.result.summary = "dee-spectrum: minimum signal " + num(sig[imin].signal, 6) + " at omega_DD/2pi = " +
                       num(to_kHz2pi(grid[imin]), 9) + " kHz -> " + path.string();
  return ctx.result;
}

// ---------------------------------------------------------------- polar-scan

RunResult cmd_polar(const Section& root, const RunOptions& o) {
  root.allow({"seed", "output_dir", "workers", "register", "polar", "pulse_errors", "sequence"});
  Context ctx = make_context(root, o, "polar-scan");
  const SpinRegister reg = read_register(root.child("register"));
  const SequenceParams sp = read_sequence(root.maybe_child("sequence"));
  const Section p = root.child("polar");
  p.allow({"f1", "pulses", "rf_rabi_2pikHz", "phi_rf_deg", "fit"});
  PolarParams pp;
  pp.pulses = p.get<int>("pulses", pp.pulses);
  pp.rf_rabi = kHz2pi(p.get<double>("rf_rabi_2pikHz", 2.0));
  pp.errors = read_errors(root.maybe_child("pulse_errors"), sp);
  pp.workers = ctx.workers;
  const double f1 = p.get<double>("f1");
  std::vector<double> grid;
  if (p.has("phi_rf_deg")) {
    for (double v : read_grid(p.child("phi_rf_deg"))) grid.push_back(v * deg);
  } else {
    for (int i = 0; i < 72; ++i) grid.push_back(i * pi / 72);
  }
  const auto scan = polar_position_scan(reg, grid, f1, pp);
  std::ostringstream csv;
  csv << "phi_rf_deg,signal\n";
  for (const auto& q : scan) csv << num(q.x / deg, 10) << ',' << num(q.signal, 10) << '\n';
  const fs::path path = ctx.write("polar_scan.csv", csv.str());

  json rep{{"f1", f1}, {"contrast", scan_contrast(scan)}};
  json mins = json::array();
  for (const auto& m : scan_minima(scan)) mins.push_back({{"phi_rf_deg", m.x / deg}, {"signal", m.signal}});
  rep["minima"] = mins;
  json truth = json::array();
  for (const auto& n : reg.nuclei()) truth.push_back(std::fmod(n.hyperfine.azimuth, pi) / deg);
  rep["true_azimuths_mod180_deg"] = truth;
  std::string fitted;
  if (p.get<bool>("fit", true) && reg.size() <= 2) {
    const double duration = build_sequence(Family::AXY8, 1, reg.nucleus(1).larmor, f1, pp.pulses).total_time;
    const AzimuthFit fit = fit_polar_azimuths(scan, reg.size(), f1, reg.nucleus(1).hyperfine.a_perp, pp.rf_rabi, duration);
    json az = json::array();
    for (double a : fit.azimuths) {
      az.push_back(a / deg);
      fitted += (fitted.empty() ? "" : "/") + num(a / deg, 5);
    }
    rep["fit"] = {{"azimuths_mod180_deg", az}, {"rms_residual", fit.rms_residual}};
  }
  ctx.write("report.json", dump(rep));
  ctx.result.summary = "polar-scan: contrast " + num(scan_contrast(scan), 6) +
                       (fitted.empty() ? "" : ", fitted azimuths " + fitted + " deg") + " -> " + path.string();
  return ctx.result;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"hyperfine",       "census",       "gate-sim",  "protocol-sim",
                                              "robustness-scan", "dee-spectrum", "polar-scan"};
  return names;
}

RunResult run_subcommand(const std::string& name, const RunOptions& opt) {
  const Section root = Section::load_file(opt.config);
  if (name == "hyperfine") return cmd_hyperfine(root, opt);
  if (name == "census") return cmd_census(root, opt);
  if (name == "gate-sim") return cmd_gate_sim(root, opt);
  if (name == "protocol-sim") return cmd_protocol_sim(root, opt);
  if (name == "robustness-scan") return cmd_robustness(root, opt);
  if (name == "dee-spectrum") return cmd_dee(root, opt);
  if (name == "polar-scan") return cmd_polar(root, opt);
  throw Error(Errc::invalid_argument, "unknown subcommand '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::invalid_argument, "cannot open " + path);
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(f, line)) throw Error(Errc::config_parse, path + ": missing header row");
  t.header = split(line);
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw Error(Errc::config_parse, path + ": line " + std::to_string(lineno) + " has " +
                                          std::to_string(cells.size()) + " cells, header has " +
                                          std::to_string(t.header.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != c.size())
        throw Error(Errc::config_parse, path + ": line " + std::to_string(lineno) + " cell '" + c + "' is not numeric");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace nvreg::cli
