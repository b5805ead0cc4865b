// Runs the acceptance criteria and prints one verdict line per criterion.
// Usage: acceptance [core|mc|all]
#include <cstdio>
#include <cstring>

#include "xtend/acceptance.hpp"

int main(int argc, char** argv) {
  xtend::Suite suite = xtend::Suite::All;
  if (argc > 1 && std::strcmp(argv[1], "core") == 0) suite = xtend::Suite::Core;
  if (argc > 1 && std::strcmp(argv[1], "mc") == 0) suite = xtend::Suite::MonteCarlo;
  int failed = 0;
  xtend::run_acceptance(suite, 20240601, [&](const xtend::CriterionResult& r) {
    std::printf("%s\n", xtend::format_result(r).c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  });
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
