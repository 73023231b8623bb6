#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "kickwave/action.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/initial_data.hpp"

namespace kickwave {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

// First line (1-based) of `text` containing the quoted key, or 0.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Reads keys of one JSON object with defaults; finish() rejects keys that were
// never read. Errors name the source, the line of the key and its JSON path.
class Section {
 public:
  Section(const json& obj, std::string path, const std::string* text, std::string source)
      : obj_(obj), path_(std::move(path)), text_(text), source_(std::move(source)) {
    if (!obj_.is_object()) fail(path_.empty() ? "root" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "wrong type for '" + key + "'");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(obj_.contains(key) ? obj_.at(key) : empty, path_ + "/" + key, text_, source_);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) fail(k, "unknown key '" + k + "'");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (text_) {
      const auto line = line_of_key(*text_, key);
      if (line) os << ":" << line;
    }
    os << ": " << what << " at " << (path_.empty() ? "/" : path_);
    throw ConfigError(os.str());
  }

 private:
  const json& obj_;
  std::string path_;
  const std::string* text_;
  std::string source_;
  std::set<std::string> seen_;
};

}  // namespace detail

struct GridPolicy {
  double h = 1.0 / 64.0;
  double r_width = 4.0;  // grid half-width beyond the endpoints, per unit of horizon
};

struct ActionSection {
  double p = 1.0;
  double el_tol = 1e-8;
};

struct EnvSampleParams {
  std::int64_t t0 = 0, t1 = 0;
  std::int64_t i0 = -4, i1 = 3;
};
struct EvolveParams {
  InitialPotential initial;
  std::int64_t m = 0, n = 16;
  double half_width = 16.0;
};
struct MinimizerParams {
  std::string mode = "point_to_point";  // or one_sided
  std::int64_t t0 = 0, t1 = 16;
  double x0 = 0.0, x1 = 0.0;
  double v = 0.0;
  std::int64_t horizon = 64;  // one_sided: start time t1 - horizon
};
struct ShapeParams {
  std::vector<double> vs{0.0, 0.5, 1.0};
  std::vector<double> ps{1.0};
  std::int64_t n = 128;
  std::size_t replicas = 200;
};
struct ConcentrationParams {
  std::int64_t n = 256;
  std::size_t replicas = 500;
  double v = 0.0;
  std::size_t points = 24;
};
struct BusemannParams {
  double v = 0.0;
  std::int64_t horizon = 256;
  std::vector<std::pair<std::int64_t, double>> points{{0, 0.0}, {1, 0.25}, {2, -0.25}};
};
struct ShocksParams {
  double v = 0.0;
  std::int64_t horizon = 256;
  std::int64_t t0 = 1, t1 = 8;
  double window = 8.0;
};
struct PullbackParams {
  std::vector<std::int64_t> ms{-16, -32, -64, -128};
  double v = 0.0;
  double window = 20.0;
  std::int64_t horizon = 512;
  double global_margin = 160.0;
  InitialPotential initial;
};
struct MetricParams {
  std::size_t trials = 100;
  double half_width = 12.0;
};

using ExperimentParams = std::variant<EnvSampleParams, EvolveParams, MinimizerParams, ShapeParams, ConcentrationParams,
                                      BusemannParams, ShocksParams, PullbackParams, MetricParams>;

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"env-sample", "evolve",   "minimizer", "shape",       "concentration",
                                          "busemann",   "shocks",   "pullback",  "metric-check"};
  return k;
}

struct RunConfig {
  int schema_version = kSchemaVersion;
  EnvironmentConfig env;
  GridPolicy grid;
  ActionSection action;
  std::string kind = "shape";
  ExperimentParams params = ShapeParams{};
  std::vector<std::uint64_t> seeds;  // explicit list; empty: derived from seed_count
  std::size_t seed_count = 1;

  // Seeds of per-seed experiments: the list, else replica seeds of master_seed
  // (a single run uses master_seed itself).
  std::vector<std::uint64_t> seed_list() const;
};

namespace detail {

inline InitialPotential parse_initial(Section s) {
  const auto form = s.get<std::string>("form", "zero");
  InitialPotential w;
  if (form == "zero") {
    w = InitialPotential::zero();
  } else if (form == "linear") {
    w = InitialPotential::linear(s.get("v", 0.0));
  } else if (form == "two_slope") {
    w = InitialPotential::two_slope(s.get("v_minus", 0.0), s.get("v_plus", 0.0));
  } else if (form == "piecewise_linear") {
    w = InitialPotential::piecewise_linear(s.get("breaks", std::vector<double>{}), s.get("slopes", std::vector<double>{0.0}));
  } else if (form == "quadratic") {
    w = InitialPotential::quadratic(s.get("c", 1.0));
  } else if (form == "perturbed") {
    w = InitialPotential(InitialPotential::Perturbed{s.get("v_minus", 0.0), s.get("v_plus", 0.0),
                                                     s.get("amplitude", 0.0), s.get("period", 1.0)});
  } else if (form == "oscillating") {
    w = InitialPotential(InitialPotential::Oscillating{s.get("c_minus", 0.0), s.get("d_minus", 0.0),
                                                       s.get("c_plus", 0.0), s.get("d_plus", 0.0)});
  } else {
    s.fail("form", "unknown initial form '" + form + "'");
  }
  s.finish();
  return w;
}

inline json initial_json(const InitialPotential& w) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, InitialPotential::Zero>) return {{"form", "zero"}};
        if constexpr (std::is_same_v<T, InitialPotential::Linear>) return {{"form", "linear"}, {"v", f.v}};
        if constexpr (std::is_same_v<T, InitialPotential::PiecewiseLinear>)
          return {{"form", "piecewise_linear"}, {"breaks", f.breaks}, {"slopes", f.slopes}};
        if constexpr (std::is_same_v<T, InitialPotential::Quadratic>) return {{"form", "quadratic"}, {"c", f.c}};
        if constexpr (std::is_same_v<T, InitialPotential::Perturbed>)
          return {{"form", "perturbed"}, {"v_minus", f.v_minus}, {"v_plus", f.v_plus},
                  {"amplitude", f.amplitude}, {"period", f.period}};
        if constexpr (std::is_same_v<T, InitialPotential::Oscillating>)
          return {{"form", "oscillating"}, {"c_minus", f.c_minus}, {"d_minus", f.d_minus},
                  {"c_plus", f.c_plus}, {"d_plus", f.d_plus}};
      },
      w.form());
}

inline ExperimentParams parse_params(const std::string& kind, Section s) {
  ExperimentParams out;
  if (kind == "env-sample") {
    EnvSampleParams p;
    p.t0 = s.get("t0", p.t0), p.t1 = s.get("t1", p.t1), p.i0 = s.get("i0", p.i0), p.i1 = s.get("i1", p.i1);
    if (p.t1 < p.t0 || p.i1 < p.i0) s.fail("t1", "empty cell range");
    out = p;
  } else if (kind == "evolve") {
    EvolveParams p;
    p.initial = parse_initial(s.child("initial"));
    p.m = s.get("m", p.m), p.n = s.get("n", p.n), p.half_width = s.get("half_width", p.half_width);
    if (p.n < p.m) s.fail("n", "n must not precede m");
    out = p;
  } else if (kind == "minimizer") {
    MinimizerParams p;
    p.mode = s.get("mode", p.mode);
    if (p.mode != "point_to_point" && p.mode != "one_sided") s.fail("mode", "mode must be point_to_point or one_sided");
    p.t0 = s.get("t0", p.t0), p.t1 = s.get("t1", p.t1), p.x0 = s.get("x0", p.x0), p.x1 = s.get("x1", p.x1);
    p.v = s.get("v", p.v), p.horizon = s.get("horizon", p.horizon);
    out = p;
  } else if (kind == "shape") {
    ShapeParams p;
    p.vs = s.get("vs", p.vs), p.ps = s.get("ps", p.ps), p.n = s.get("n", p.n);
    p.replicas = s.get("replicas", p.replicas);
    out = p;
  } else if (kind == "concentration") {
    ConcentrationParams p;
    p.n = s.get("n", p.n), p.replicas = s.get("replicas", p.replicas), p.v = s.get("v", p.v);
    p.points = s.get("points", p.points);
    out = p;
  } else if (kind == "busemann") {
    BusemannParams p;
    p.v = s.get("v", p.v), p.horizon = s.get("horizon", p.horizon);
    p.points = s.get("points", p.points);
    if (p.points.size() < 2) s.fail("points", "busemann needs at least two points");
    out = p;
  } else if (kind == "shocks") {
    ShocksParams p;
    p.v = s.get("v", p.v), p.horizon = s.get("horizon", p.horizon), p.t0 = s.get("t0", p.t0);
    p.t1 = s.get("t1", p.t1), p.window = s.get("window", p.window);
    if (p.t1 < p.t0) s.fail("t1", "t1 must not precede t0");
    out = p;
  } else if (kind == "pullback") {
    PullbackParams p;
    p.ms = s.get("ms", p.ms), p.v = s.get("v", p.v), p.window = s.get("window", p.window);
    p.horizon = s.get("horizon", p.horizon), p.global_margin = s.get("global_margin", p.global_margin);
    p.initial = parse_initial(s.child("initial"));
    out = p;
  } else if (kind == "metric-check") {
    MetricParams p;
    p.trials = s.get("trials", p.trials), p.half_width = s.get("half_width", p.half_width);
    out = p;
  } else {
    s.fail("kind", "unknown experiment kind '" + kind + "'");
  }
  s.finish();
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line:column
    const std::size_t at = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
    const auto nl = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t col = nl == std::string::npos ? at : at - nl - 1;
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error");
  }
  RunConfig cfg;
  detail::Section top(root, "", &text, source);
  cfg.schema_version = top.get("schema_version", 0);
  if (cfg.schema_version != kSchemaVersion)
    top.fail("schema_version", "schema_version must be " + std::to_string(kSchemaVersion));

  auto env = top.child("environment");
  cfg.env.master_seed = env.get<std::uint64_t>("master_seed", 0);
  cfg.env.intensity = env.get("intensity", 1.0);
  {
    auto xi = env.child("xi_dist");
    const auto kind = xi.get<std::string>("kind", "uniform");
    if (kind == "uniform") {
      cfg.env.xi.kind = XiDistribution::Kind::uniform;
    } else if (kind == "two_point") {
      cfg.env.xi.kind = XiDistribution::Kind::two_point;
      cfg.env.xi.p_plus = xi.get("p", 0.5);
    } else {
      xi.fail("kind", "xi_dist kind must be uniform or two_point");
    }
    xi.finish();
    auto ka = env.child("kappa_dist");
    const auto kk = ka.get<std::string>("kind", "uniform");
    if (kk == "uniform") {
      cfg.env.kappa.kind = KappaDistribution::Kind::uniform;
    } else if (kk == "fixed") {
      cfg.env.kappa.kind = KappaDistribution::Kind::fixed;
      cfg.env.kappa.value = ka.get("value", 1.0);
    } else {
      ka.fail("kind", "kappa_dist kind must be uniform or fixed");
    }
    ka.finish();
    if (env.get<std::string>("bump", "quartic") != "quartic") env.fail("bump", "only the quartic bump is available");
  }
  env.finish();
  try {
    cfg.env.validate();
  } catch (const Error& e) {
    env.fail("intensity", e.what());
  }

  auto grid = top.child("grid");
  cfg.grid.h = grid.get("h", cfg.grid.h);
  cfg.grid.r_width = grid.get("r_width", cfg.grid.r_width);
  if (!(cfg.grid.h > 0.0) || !(cfg.grid.r_width > 0.0)) grid.fail("h", "h and r_width must be positive");
  grid.finish();

  auto act = top.child("action");
  cfg.action.p = act.get("p", cfg.action.p);
  cfg.action.el_tol = act.get("el_tol", cfg.action.el_tol);
  if (!(cfg.action.p >= 0.0 && cfg.action.p <= 1.0)) act.fail("p", "p must lie in [0, 1]");
  act.finish();

  auto ex = top.child("experiment");
  cfg.kind = ex.get<std::string>("kind", cfg.kind);
  cfg.seeds = ex.get("seeds", cfg.seeds);
  cfg.seed_count = ex.get("seed_count", cfg.seed_count);
  if (cfg.seed_count == 0) ex.fail("seed_count", "seed_count must be positive");
  cfg.params = detail::parse_params(cfg.kind, ex.child("params"));
  ex.finish();
  top.finish();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// Fully expanded config (every default spelled out); its dump is the hashed form.
inline json to_json(const RunConfig& c) {
  json env = {{"master_seed", c.env.master_seed}, {"intensity", c.env.intensity}, {"bump", "quartic"}};
  env["xi_dist"] = c.env.xi.kind == XiDistribution::Kind::uniform ? json{{"kind", "uniform"}}
                                                                  : json{{"kind", "two_point"}, {"p", c.env.xi.p_plus}};
  env["kappa_dist"] = c.env.kappa.kind == KappaDistribution::Kind::uniform
                          ? json{{"kind", "uniform"}}
                          : json{{"kind", "fixed"}, {"value", c.env.kappa.value}};
  json params = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, EnvSampleParams>) return {{"t0", p.t0}, {"t1", p.t1}, {"i0", p.i0}, {"i1", p.i1}};
        if constexpr (std::is_same_v<T, EvolveParams>)
          return {{"initial", detail::initial_json(p.initial)}, {"m", p.m}, {"n", p.n}, {"half_width", p.half_width}};
        if constexpr (std::is_same_v<T, MinimizerParams>)
          return {{"mode", p.mode}, {"t0", p.t0}, {"t1", p.t1}, {"x0", p.x0}, {"x1", p.x1}, {"v", p.v},
                  {"horizon", p.horizon}};
        if constexpr (std::is_same_v<T, ShapeParams>)
          return {{"vs", p.vs}, {"ps", p.ps}, {"n", p.n}, {"replicas", p.replicas}};
        if constexpr (std::is_same_v<T, ConcentrationParams>)
          return {{"n", p.n}, {"replicas", p.replicas}, {"v", p.v}, {"points", p.points}};
        if constexpr (std::is_same_v<T, BusemannParams>) return {{"v", p.v}, {"horizon", p.horizon}, {"points", p.points}};
        if constexpr (std::is_same_v<T, ShocksParams>)
          return {{"v", p.v}, {"horizon", p.horizon}, {"t0", p.t0}, {"t1", p.t1}, {"window", p.window}};
        if constexpr (std::is_same_v<T, PullbackParams>)
          return {{"ms", p.ms}, {"v", p.v}, {"window", p.window}, {"horizon", p.horizon},
                  {"global_margin", p.global_margin}, {"initial", detail::initial_json(p.initial)}};
        if constexpr (std::is_same_v<T, MetricParams>) return {{"trials", p.trials}, {"half_width", p.half_width}};
      },
      c.params);
  return {{"schema_version", c.schema_version},
          {"environment", env},
          {"grid", {{"h", c.grid.h}, {"r_width", c.grid.r_width}}},
          {"action", {{"p", c.action.p}, {"el_tol", c.action.el_tol}}},
          {"experiment", {{"kind", c.kind}, {"seeds", c.seeds}, {"seed_count", c.seed_count}, {"params", params}}}};
}

inline std::vector<std::uint64_t> RunConfig::seed_list() const {
  if (!seeds.empty()) return seeds;
  if (seed_count == 1) return {env.master_seed};
  std::vector<std::uint64_t> out(seed_count);
  for (std::size_t r = 0; r < seed_count; ++r) out[r] = replica_seed(env.master_seed, r);
  return out;
}

}  // namespace kickwave
