#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "kickwave/acceptance.hpp"
#include "kickwave/experiments.hpp"

using namespace kickwave;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUntrusted = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The subcommand names the experiment; a config that names a different one is an error.
RunConfig config_for(const std::string& kind, const std::string& path) {
  if (path.empty()) {
    const json j = {{"schema_version", kSchemaVersion}, {"experiment", {{"kind", kind}}}};
    return parse_config(j.dump(), "defaults");
  }
  const std::string text = read_file(path);
  if (kind == "run") return parse_config(text, path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    return parse_config(text, path);  // reports the syntax error with its position
  }
  const bool named = j.is_object() && j.contains("experiment") && j["experiment"].is_object() &&
                     j["experiment"].contains("kind");
  if (!named) {
    j["experiment"]["kind"] = kind;
    return parse_config(j.dump(2), path + " (kind from subcommand)");
  }
  RunConfig cfg = parse_config(text, path);
  if (cfg.kind != kind) throw ConfigError(path + ": experiment kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
  return cfg;
}

struct Common {
  std::string config;
  std::string out = "kickwave_out";
  unsigned workers = default_workers();
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* cf = sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  if (needs_config) cf->required();
  c.seed_opt = sub->add_option("--seed", c.seed, "master seed; replaces any explicit seed list");
  sub->add_option("--out", c.out, "output directory (KICKWAVE_OUT takes precedence)");
  sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

int run_kind(const std::string& kind, const Common& c) {
  RunConfig cfg = config_for(kind, c.config);
  if (c.seed_opt->count()) {
    cfg.env.master_seed = c.seed;
    cfg.seeds.clear();
  }
  std::string out = c.out;
  if (const char* env = std::getenv("KICKWAVE_OUT"); env && *env) out = env;
  const Manifest m = run_to_directory(cfg, out, c.workers);
  std::printf("%s: %zu files, %zu seeds, %.3f s -> %s\n", cfg.kind.c_str(), m.outputs.size(), m.seeds.size(),
              m.wall_seconds, out.c_str());
  if (m.untrusted > 0) {
    std::fprintf(stderr, "warning: %zu untrusted results\n", m.untrusted);
    for (const auto& f : m.flags) std::fprintf(stderr, "  %s\n", f.c_str());
    return kExitUntrusted;
  }
  return kExitOk;
}

int verify(const std::string& manifest_path, unsigned workers, const std::set<int>& only, bool battery) {
  const Manifest m = Manifest::load(manifest_path);
  const auto rep = replay(m, workers);
  std::printf("%s  replay of %s\n", rep.identical ? "PASS" : "FAIL", manifest_path.c_str());
  for (const auto& s : rep.mismatches) std::printf("      mismatch: %s\n", s.c_str());
  int failed = !rep.identical;
  if (battery) {
    acceptance::Options opt;
    opt.workers = workers;
    for (const auto& c : acceptance::criteria()) {
      if (!only.empty() && !only.count(c.id)) continue;
      const auto r = acceptance::run_criterion(c, opt);
      std::printf("%s\n", acceptance::format(r).c_str());
      std::fflush(stdout);
      failed += !r.pass;
    }
  }
  std::printf("%s\n", failed ? "verify: FAIL" : "verify: PASS");
  return failed ? kExitError : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kickwave: kicked Burgers with shot-noise forcing"};
  app.require_subcommand(1);

  // one Common per subcommand so defaults are not shared across parses
  std::vector<std::pair<std::string, Common>> kinds;
  for (const auto& k : experiment_kinds()) kinds.emplace_back(k, Common{});
  kinds.emplace_back("run", Common{});
  std::vector<CLI::App*> subs;
  for (auto& [k, c] : kinds) {
    auto* sub = app.add_subcommand(k, k == "run" ? "run the experiment named in the config" : "run a " + k + " experiment");
    add_common(sub, c, k == "run");
    subs.push_back(sub);
  }

  std::string manifest;
  unsigned vworkers = default_workers();
  std::set<int> only;
  bool replay_only = false;
  auto* ver = app.add_subcommand("verify", "replay a manifest, then run the acceptance battery");
  ver->add_option("--manifest", manifest, "manifest.json of a previous run")->required()->check(CLI::ExistingFile);
  ver->add_option("--workers", vworkers, "worker threads")->check(CLI::PositiveNumber);
  ver->add_option("--only", only, "criterion ids to run (default: all)")->check(CLI::Range(1, 13));
  ver->add_flag("--replay-only", replay_only, "skip the acceptance battery");

  CLI11_PARSE(app, argc, argv);
  try {
    if (ver->parsed()) return verify(manifest, vworkers, only, !replay_only);
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) return run_kind(kinds[i].first, kinds[i].second);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
