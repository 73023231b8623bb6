#include <cstdio>
#include <set>

#include "CLI11.hpp"

#include "kickwave/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kickwave acceptance battery"};
  kickwave::acceptance::Options opt;
  std::set<int> only;
  app.add_option("--seed", opt.master_seed, "master seed of the battery");
  app.add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "criterion ids to run (default: all)")->check(CLI::Range(1, 13));
  CLI11_PARSE(app, argc, argv);

  int failed = 0, ran = 0;
  for (const auto& c : kickwave::acceptance::criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto r = kickwave::acceptance::run_criterion(c, opt);
    std::printf("%s\n", kickwave::acceptance::format(r).c_str());
    std::fflush(stdout);
    failed += !r.pass;
    ++ran;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
