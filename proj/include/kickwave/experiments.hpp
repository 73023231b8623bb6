#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "kickwave/attraction.hpp"
#include "kickwave/busemann.hpp"
#include "kickwave/config.hpp"
#include "kickwave/io.hpp"
#include "kickwave/manifest.hpp"
#include "kickwave/minimizers.hpp"
#include "kickwave/parallel.hpp"
#include "kickwave/shape.hpp"

namespace kickwave {

struct OutputFile {
  std::string name;
  std::string content;
};

struct ExperimentOutput {
  std::vector<OutputFile> files;
  std::vector<std::uint64_t> seeds;
  std::size_t untrusted = 0;
  std::vector<std::string> flags;
};

namespace detail {

inline Environment env_for(const RunConfig& cfg, std::uint64_t seed) {
  EnvironmentConfig ec = cfg.env;
  ec.master_seed = seed;
  return Environment(ec);
}

inline std::string seeded(const std::string& stem, std::uint64_t seed, const char* ext) {
  return stem + "_" + std::to_string(seed) + ext;
}

inline std::string dump(const json& j) { return j.dump(2) + '\n'; }

// Per-seed work in parallel; files concatenated in seed order.
template <typename F>
ExperimentOutput per_seed(const RunConfig& cfg, unsigned workers, F&& one) {
  ExperimentOutput out;
  out.seeds = cfg.seed_list();
  auto parts = parallel_map(out.seeds.size(), workers, [&](std::size_t k) { return one(out.seeds[k]); });
  for (auto& p : parts) {
    for (auto& f : p.files) out.files.push_back(std::move(f));
    out.untrusted += p.untrusted;
    for (auto& fl : p.flags) out.flags.push_back(std::move(fl));
  }
  return out;
}

inline ExperimentOutput run_env_sample(const RunConfig& cfg, const EnvSampleParams& p, unsigned workers) {
  return per_seed(cfg, workers, [&](std::uint64_t seed) {
    ExperimentOutput o;
    o.files.push_back({seeded("cells", seed, ".csv"), io::cells_csv(env_for(cfg, seed), p.t0, p.t1, p.i0, p.i1)});
    return o;
  });
}

inline ExperimentOutput run_evolve(const RunConfig& cfg, const EvolveParams& p, unsigned workers) {
  return per_seed(cfg, workers, [&](std::uint64_t seed) {
    const auto env = env_for(cfg, seed);
    const double reach = p.half_width + cfg.grid.r_width * static_cast<double>(p.n - p.m);
    const GridSpec g = GridSpec::around(0.0, reach, reach, cfg.grid.h);
    EvolveOptions eo;
    eo.watch = WatchRegion{*g.node_near(-p.half_width), *g.node_near(p.half_width)};
    const auto res = evolve(env, p.initial.sample(g, p.m), p.n, {cfg.action.p}, eo);
    ExperimentOutput o;
    o.files.push_back({seeded("profile", seed, ".csv"), io::profile_csv(res.profile, seed, res.boundary_contact)});
    if (p.n > p.m) {
      const auto u = velocity_from(res.profile, res.stack.map_into(p.n));
      o.files.push_back({seeded("velocity", seed, ".csv"), io::profile_csv(u, seed, res.boundary_contact)});
    }
    if (res.boundary_contact) {
      ++o.untrusted;
      o.flags.push_back("boundary_contact seed " + std::to_string(seed));
    }
    return o;
  });
}

inline ExperimentOutput run_minimizer(const RunConfig& cfg, const MinimizerParams& p, unsigned workers) {
  return per_seed(cfg, workers, [&](std::uint64_t seed) {
    const auto env = env_for(cfg, seed);
    RefineOptions ro;
    ro.el_tol = cfg.action.el_tol;
    MinimizerTrace tr;
    json side;
    if (p.mode == "point_to_point") {
      const double margin = cfg.grid.r_width * static_cast<double>(p.t1 - p.t0);
      const auto r = point_to_point(env, p.t0, p.x0, p.t1, p.x1, {cfg.action.p}, {cfg.grid.h, margin, true, ro});
      tr = r.trace;
      side = io::trace_sidecar(tr);
      side["value"] = r.value;
      side["grid_value"] = r.grid_value;
    } else {
      const double margin = cfg.grid.r_width * static_cast<double>(p.horizon);
      tr = one_sided_approx(env, p.t1, p.x1, p.v, p.t1 - p.horizon, {cfg.action.p}, {cfg.grid.h, margin, true, ro});
      side = io::trace_sidecar(tr);
    }
    side["seed"] = seed;
    ExperimentOutput o;
    o.files.push_back({seeded("path", seed, ".csv"), io::path_csv(tr.path)});
    o.files.push_back({seeded("path", seed, ".json"), dump(side)});
    if (tr.untrusted || !tr.refined) {
      ++o.untrusted;
      o.flags.push_back("trace flagged seed " + std::to_string(seed));
    }
    return o;
  });
}

inline ExperimentOutput run_shape(const RunConfig& cfg, const ShapeParams& p, unsigned workers) {
  ShapeStudyConfig sc;
  sc.env = cfg.env;
  sc.vs = p.vs;
  sc.ps = p.ps;
  sc.n = p.n;
  sc.replicas = p.replicas;
  sc.grid = {cfg.grid.h, cfg.grid.r_width};
  const auto st = shape_study(sc, workers);
  ExperimentOutput o;
  o.seeds = st.seeds;
  o.files.push_back({"shape.csv", io::shape_csv(st)});
  o.files.push_back({"shape_diagnostics.json", dump(io::shape_diagnostics(st))});
  for (const auto& e : st.estimates) o.untrusted += e.untrusted;
  if (o.untrusted) o.flags.push_back("untrusted point actions: " + std::to_string(o.untrusted));
  return o;
}

inline ExperimentOutput run_concentration(const RunConfig& cfg, const ConcentrationParams& p, unsigned workers) {
  TailStudyConfig tc;
  tc.env = cfg.env;
  tc.n = p.n;
  tc.replicas = p.replicas;
  tc.v = p.v;
  tc.grid = {cfg.grid.h, cfg.grid.r_width};
  tc.points = p.points;
  const auto t = tail_study(tc, workers);
  ExperimentOutput o;
  o.seeds = t.seeds;
  o.files.push_back({"tails.csv", io::tails_csv(t)});
  o.files.push_back({"tails.json", dump(io::tails_summary(t))});
  o.untrusted = t.untrusted;
  if (o.untrusted) o.flags.push_back("untrusted point actions: " + std::to_string(o.untrusted));
  return o;
}

inline ExperimentOutput run_busemann(const RunConfig& cfg, const BusemannParams& p, unsigned workers) {
  return per_seed(cfg, workers, [&](std::uint64_t seed) {
    const auto env = env_for(cfg, seed);
    std::vector<SpacePoint> pts;
    std::int64_t n_lo = p.points.front().first, n_hi = n_lo;
    for (const auto& [n, x] : p.points) {
      pts.push_back({n, x});
      n_lo = std::min(n_lo, n), n_hi = std::max(n_hi, n);
    }
    BusemannOptions bo;
    bo.horizon = p.horizon;
    bo.h = cfg.grid.h;
    bo.margin = cfg.grid.r_width * static_cast<double>(n_hi - n_lo + p.horizon);
    bo.params = {cfg.action.p};
    const auto field = busemann_field(env, pts, p.v, bo);
    std::vector<BusemannEstimate> ests;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) ests.push_back(busemann_from_field(env, field, pts[i], pts[j], bo.c, bo.refine));
    ExperimentOutput o;
    o.files.push_back({seeded("busemann", seed, ".csv"), io::busemann_csv(ests)});
    for (const auto& e : ests) o.untrusted += e.untrusted || !e.reliable;
    if (o.untrusted) o.flags.push_back("unpaired or untrusted Busemann estimates seed " + std::to_string(seed));
    return o;
  });
}

inline ExperimentOutput run_shocks(const RunConfig& cfg, const ShocksParams& p, unsigned workers) {
  return per_seed(cfg, workers, [&](std::uint64_t seed) {
    const auto env = env_for(cfg, seed);
    const std::int64_t m = p.t0 - 1 - p.horizon;
    const double margin = cfg.grid.r_width * static_cast<double>(p.t1 - m);
    const GridSpec g = cone_grid(0.0, -p.window, p.window, p.v, m, p.t1, margin, cfg.grid.h);
    const OneSidedField field(env, m, p.t1, g, {TraceSource::linear_initial_v, p.v, 0.0, {cfg.action.p}});
    // genealogy on the window only: the stack cropped to [-window, window];
    // nodes whose predecessor lies outside the window drop out of the trusted
    // range (their cropped velocity would be wrong)
    BackpointerStack sub;
    const std::size_t a = *g.node_near(-p.window), b = *g.node_near(p.window);
    sub.start_time = p.t0 - 1;
    sub.grid = {g.x(a), g.h, b - a + 1};
    bool field_trusted = true;
    sub.windows.push_back({0, b - a});
    for (std::int64_t t = p.t0; t <= p.t1; ++t) {
      const auto& w = field.result().stack.windows[static_cast<std::size_t>(t - m)];
      field_trusted = field_trusted && w.first <= a && w.second >= b;
      const auto& map = field.result().stack.map_into(t);
      std::vector<Index> cropped(b - a + 1);
      std::size_t lo = b + 1, hi = a;
      for (std::size_t i = a; i <= b; ++i) {
        cropped[i - a] = static_cast<Index>(std::clamp<std::size_t>(map[i], a, b) - a);
        if (map[i] >= a && map[i] <= b) lo = std::min(lo, i), hi = std::max(hi, i);
      }
      lo = std::max(lo, w.first), hi = std::min(hi, w.second);
      sub.windows.push_back(lo <= hi ? std::pair{lo - a, hi - a} : std::pair<std::size_t, std::size_t>{1, 0});
      sub.maps.push_back(std::move(cropped));
    }
    const auto forest = shock_genealogy(sub, p.t0, p.t1);
    ExperimentOutput o;
    json j = io::shocks_json(forest);
    j["seed"] = seed;
    o.files.push_back({seeded("shocks", seed, ".json"), dump(j)});
    if (!field_trusted) {
      ++o.untrusted;
      o.flags.push_back("shock window not fully trusted seed " + std::to_string(seed));
    }
    return o;
  });
}

inline ExperimentOutput run_pullback(const RunConfig& cfg, const PullbackParams& p, unsigned workers) {
  ExperimentOutput out;
  out.seeds = cfg.seed_list();
  PullbackConfig pc;
  pc.ms = p.ms;
  pc.v = p.v;
  pc.window = p.window;
  pc.h = cfg.grid.h;
  pc.margin_per_step = cfg.grid.r_width;
  pc.global = {p.horizon, cfg.grid.h, p.global_margin, 1.0, false, {cfg.action.p}};
  pc.params = {cfg.action.p};
  const auto rows = parallel_map(out.seeds.size(), workers, [&](std::size_t k) {
    return pullback_experiment(env_for(cfg, out.seeds[k]), p.initial, pc);
  });
  std::vector<io::SeededPullbackRow> flat;
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (const auto& r : rows[k]) {
      flat.push_back({out.seeds[k], r});
      out.untrusted += r.boundary;
    }
  out.files.push_back({"pullback.csv", io::pullback_csv(flat)});
  const auto cls = classify_initial(InitialDataSpec::from(p.initial));
  json meta = {{"basin", to_string(cls.basin)}, {"predicted_v", cls.v}, {"v", p.v}};
  out.files.push_back({"pullback.json", dump(meta)});
  if (out.untrusted) out.flags.push_back("pullback rows with boundary flags: " + std::to_string(out.untrusted));
  return out;
}

inline ExperimentOutput run_metric_check(const RunConfig& cfg, const MetricParams& p, unsigned) {
  const GridSpec g = GridSpec::around(0.0, p.half_width, p.half_width, cfg.grid.h);
  std::size_t symmetric = 0, triangle = 0, identity = 0;
  double worst_triangle = 0.0;
  for (std::size_t t = 0; t < p.trials; ++t) {
    CellStream rng(cfg.env.master_seed, 0, static_cast<std::int64_t>(t));
    const auto a = families::random_monotone(g, rng), b = families::random_monotone(g, rng),
               c = families::random_monotone(g, rng);
    const double ab = metric_d(a, b), bc = metric_d(b, c), ac = metric_d(a, c);
    symmetric += ab == metric_d(b, a);
    identity += metric_d(a, a) == 0.0;
    worst_triangle = std::max(worst_triangle, ac - ab - bc);
    triangle += ac <= ab + bc + 1e-12;
  }
  const GridSpec fg = GridSpec::around(0.0, 8.0, 8.0, cfg.grid.h);
  const auto steps = convergence_equivalence_check(families::moving_steps(fg, 128), families::step(fg));
  const auto osc = convergence_equivalence_check(families::oscillating_heights(fg, 128), families::step(fg));
  json j = {{"trials", p.trials},
            {"symmetric", symmetric},
            {"identity", identity},
            {"triangle", triangle},
            {"worst_triangle_excess", worst_triangle},
            {"moving_steps", {{"d_converges", steps.d_converges}, {"pointwise_converges", steps.pointwise_converges}}},
            {"oscillating_heights", {{"d_converges", osc.d_converges}, {"pointwise_converges", osc.pointwise_converges}}}};
  ExperimentOutput o;
  o.seeds = {cfg.env.master_seed};
  o.files.push_back({"metric.json", dump(j)});
  return o;
}

}  // namespace detail

inline ExperimentOutput run_experiment(const RunConfig& cfg, unsigned workers = 1) {
  return std::visit(
      [&](const auto& p) -> ExperimentOutput {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, EnvSampleParams>) return detail::run_env_sample(cfg, p, workers);
        if constexpr (std::is_same_v<T, EvolveParams>) return detail::run_evolve(cfg, p, workers);
        if constexpr (std::is_same_v<T, MinimizerParams>) return detail::run_minimizer(cfg, p, workers);
        if constexpr (std::is_same_v<T, ShapeParams>) return detail::run_shape(cfg, p, workers);
        if constexpr (std::is_same_v<T, ConcentrationParams>) return detail::run_concentration(cfg, p, workers);
        if constexpr (std::is_same_v<T, BusemannParams>) return detail::run_busemann(cfg, p, workers);
        if constexpr (std::is_same_v<T, ShocksParams>) return detail::run_shocks(cfg, p, workers);
        if constexpr (std::is_same_v<T, PullbackParams>) return detail::run_pullback(cfg, p, workers);
        if constexpr (std::is_same_v<T, MetricParams>) return detail::run_metric_check(cfg, p, workers);
      },
      cfg.params);
}

inline Manifest make_manifest(const RunConfig& cfg, const ExperimentOutput& out, unsigned workers, double seconds) {
  Manifest m;
  m.config = to_json(cfg);
  m.config_hash = sha256_hex(m.config.dump());
  m.seeds = out.seeds;
  for (const auto& f : out.files) m.outputs.push_back({f.name, sha256_hex(f.content), f.content.size()});
  m.wall_seconds = seconds;
  m.workers = workers;
  m.untrusted = out.untrusted;
  m.flags = out.flags;
  return m;
}

// Runs the experiment, writes its files and manifest.json into out_dir.
inline Manifest run_to_directory(const RunConfig& cfg, const std::filesystem::path& out_dir, unsigned workers) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run_experiment(cfg, workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto m = make_manifest(cfg, out, workers, secs);
  std::filesystem::create_directories(out_dir);
  for (const auto& f : out.files) {
    std::ofstream os(out_dir / f.name, std::ios::binary);
    os << f.content;
    if (!os) throw Error("cannot write " + (out_dir / f.name).string());
  }
  std::ofstream ms(out_dir / "manifest.json");
  ms << m.to_json().dump(2) << '\n';
  if (!ms) throw Error("cannot write manifest");
  return m;
}

// Re-runs a manifest's config and compares its reproducible view.
struct ReplayReport {
  bool identical = false;
  std::vector<std::string> mismatches;
};

inline ReplayReport replay(const Manifest& m, unsigned workers) {
  const RunConfig cfg = parse_config(m.config.dump(), "manifest config");
  const auto out = run_experiment(cfg, workers);
  const auto fresh = make_manifest(cfg, out, workers, 0.0);
  ReplayReport r;
  if (fresh.config_hash != m.config_hash) r.mismatches.push_back("config hash");
  if (fresh.seeds != m.seeds) r.mismatches.push_back("seed list");
  for (const auto& o : m.outputs) {
    const auto it = std::find_if(fresh.outputs.begin(), fresh.outputs.end(), [&](const auto& f) { return f.file == o.file; });
    if (it == fresh.outputs.end() || it->sha256 != o.sha256) r.mismatches.push_back(o.file);
  }
  if (fresh.outputs.size() != m.outputs.size()) r.mismatches.push_back("output count");
  r.identical = r.mismatches.empty();
  return r;
}

}  // namespace kickwave
