#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "kickwave/action.hpp"
#include "kickwave/attraction.hpp"
#include "kickwave/busemann.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/grid.hpp"
#include "kickwave/minimizers.hpp"
#include "kickwave/shape.hpp"

// Serialization of results to CSV / JSON text. Numbers use %.17g so files
// round-trip doubles and are byte-identical across runs.
namespace kickwave::io {

using nlohmann::json;

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) out_ += ',';
      out_ += h;
      first = false;
    }
    out_ += '\n';
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((append(cells, first)), ...);
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

 private:
  void cell(double x) { out_ += num(x); }
  void cell(const std::string& s) { out_ += s; }
  void cell(const char* s) { out_ += s; }
  void cell(bool b) { out_ += b ? '1' : '0'; }
  template <typename I>
    requires std::is_integral_v<I>
  void cell(I i) {
    out_ += std::to_string(i);
  }
  template <typename T>
  void append(const T& c, bool& first) {
    if (!first) out_ += ',';
    cell(c);
    first = false;
  }
  std::string out_;
};

inline json grid_json(const GridSpec& g) { return {{"x_min", g.x_min}, {"h", g.h}, {"count", g.count}}; }

// Kick points of the cells {n} x [i, i+1) for n in [t0, t1], i in [i0, i1].
inline std::string cells_csv(const Environment& env, std::int64_t t0, std::int64_t t1, std::int64_t i0,
                             std::int64_t i1) {
  CsvWriter w({"n", "i", "eta", "xi", "kappa"});
  for (std::int64_t n = t0; n <= t1; ++n)
    for (std::int64_t i = i0; i <= i1; ++i)
      for (const auto& p : env.cell_points(n, i)) w.row(n, i, p.eta, p.xi, p.kappa);
  return w.str();
}

inline std::string path_csv(const Path& path) {
  CsvWriter w({"t", "x"});
  for (std::size_t k = 0; k < path.length(); ++k) w.row(path.start_time + static_cast<std::int64_t>(k), path.x[k]);
  return w.str();
}

inline json trace_sidecar(const MinimizerTrace& tr) {
  json flags = json::array();
  if (tr.untrusted) flags.push_back("untrusted");
  if (!tr.refined) flags.push_back("unrefined");
  return {{"el_res", tr.el_res}, {"refined", tr.refined}, {"source", to_string(tr.source)}, {"flags", flags}};
}

// One JSON header line, then x,value rows over the whole grid.
inline std::string profile_csv(const GridProfile& p, std::uint64_t seed, bool boundary_contact) {
  json header = {{"time", p.time},
                 {"grid", grid_json(p.grid)},
                 {"seed", seed},
                 {"trusted", {p.lo, p.hi}},
                 {"flags", boundary_contact ? json::array({"boundary_contact"}) : json::array()}};
  std::string out = "# " + header.dump() + '\n';
  CsvWriter w({"x", "value"});
  for (std::size_t i = 0; i < p.size(); ++i) w.row(p.x(i), p.values[i]);
  return out + w.str();
}

inline std::string shape_csv(const ShapeStudy& st) {
  CsvWriter w({"v", "n", "mean", "stderr", "replicas", "p", "untrusted"});
  for (const auto& e : st.estimates) w.row(e.v, e.n, e.mean, e.se, e.replicas, e.p, e.untrusted);
  return w.str();
}

inline json shape_diagnostics(const ShapeStudy& st) {
  json d = json::array();
  for (const auto& g : st.diagnostics)
    d.push_back({{"v", g.v}, {"p", g.p}, {"times", g.times}, {"means", g.means}, {"stderr", g.ses},
                 {"richardson", g.richardson}});
  return d;
}

inline json fit_json(const std::optional<LinearFit>& f) {
  if (!f) return nullptr;
  return {{"intercept", f->intercept}, {"slope", f->slope}, {"slope_stderr", f->slope_stderr},
          {"ci95", {f->ci_lo, f->ci_hi}}, {"points", f->points}};
}

inline std::string tails_csv(const TailStudy& t) {
  CsvWriter w({"curve", "u", "p_hat"});
  for (std::size_t k = 0; k < t.action_tail.u.size(); ++k) w.row("action", t.action_tail.u[k], t.action_tail.p_hat[k]);
  for (std::size_t k = 0; k < t.excursion_tail.u.size(); ++k)
    w.row("excursion", t.excursion_tail.u[k], t.excursion_tail.p_hat[k]);
  return w.str();
}

inline json tails_summary(const TailStudy& t) {
  return {{"alpha_hat", t.alpha_hat},
          {"untrusted", t.untrusted},
          {"action_fit", {{"scale", t.action_tail.scale}, {"fit", fit_json(t.action_tail.fit)}}},
          {"excursion_fit", {{"scale", t.excursion_tail.scale}, {"fit", fit_json(t.excursion_tail.fit)}}}};
}

inline std::string busemann_csv(const std::vector<BusemannEstimate>& ests) {
  CsvWriter w({"n1", "x1", "n2", "x2", "value", "n_pairings", "last_residual", "reliable", "untrusted"});
  for (const auto& b : ests)
    w.row(b.p1.n, b.p1.x, b.p2.n, b.p2.x, b.value, b.pairing_ks.size(), b.last_residual, b.reliable, b.untrusted);
  return w.str();
}

// Adjacency: node id "t:k" for the k-th shock at time t, edges to successors.
inline json shocks_json(const ShockForest& f) {
  json nodes = json::array(), edges = json::array();
  for (const auto& frame : f.frames)
    for (std::size_t k = 0; k < frame.size(); ++k) {
      const auto& r = frame[k];
      const std::string id = std::to_string(r.time) + ":" + std::to_string(k);
      nodes.push_back({{"id", id}, {"t", r.time}, {"x", r.x}, {"u_left", r.u_left}, {"u_right", r.u_right},
                       {"exits", r.exits}});
      if (r.successor)
        edges.push_back({{"from", id},
                         {"to", std::to_string(r.time + 1) + ":" + std::to_string(*r.successor)},
                         {"nearest", r.successor_nearest}});
    }
  return {{"nodes", nodes}, {"edges", edges}, {"merges", f.merges}};
}

struct SeededPullbackRow {
  std::uint64_t seed = 0;
  PullbackRow row;
};

inline std::string pullback_csv(const std::vector<SeededPullbackRow>& rows) {
  CsvWriter w({"seed", "m", "d", "slope_probe", "boundary_flag"});
  for (const auto& r : rows) w.row(r.seed, r.row.m, r.row.d, r.row.slope, r.row.boundary);
  return w.str();
}

}  // namespace kickwave::io
