// SPDX-License-Identifier: Apache-2.0
//
// Compares the serial reference Monte Carlo kernels against the OpenMP
// variants: identical results required, wall time reported.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evolab/mc.hpp"

using namespace evolab;
using Clock = std::chrono::steady_clock;

namespace {

double time_of(const std::function<mc::Summary()>& fn, mc::Summary& out) {
  const auto t0 = Clock::now();
  out = fn();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void bench_case(const char* name, const search::GeneratorModel& model, uint64_t trials,
                uint64_t seed, bool direct) {
  mc::Summary serial, parallel;
  const double t_serial = time_of(
      [&] {
        return direct ? mc::simulate_direct(model, trials, seed, mc::Exec::kSerial)
                      : mc::simulate_vs(model, trials, seed, mc::Exec::kSerial);
      },
      serial);
  const double t_parallel = time_of(
      [&] {
        return direct ? mc::simulate_direct(model, trials, seed, mc::Exec::kParallel)
                      : mc::simulate_vs(model, trials, seed, mc::Exec::kParallel);
      },
      parallel);

  const bool identical = serial.mean_calls == parallel.mean_calls &&
                         serial.mean_cost == parallel.mean_cost &&
                         serial.stderr_calls == parallel.stderr_calls;
  std::printf("%-28s trials=%-9llu serial=%8.3fs  openmp=%8.3fs  speedup=%5.2fx  %s\n", name,
              static_cast<unsigned long long>(trials), t_serial, t_parallel,
              t_parallel > 0 ? t_serial / t_parallel : 0.0,
              identical ? "bit-identical" : "MISMATCH");
  if (!identical) std::exit(1);
}

}  // namespace

int main(int argc, char** argv) {
  uint64_t trials = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 2000000ull;
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP unavailable: parallel variant runs serially\n");
#endif
  bench_case("vs calls, p=0.5 N=8", search::uniform_model(0.5, 8), trials, 11, false);
  bench_case("vs calls, p=0.3 N=8", search::uniform_model(0.3, 8), trials, 12, false);
  bench_case("direct calls, p=0.5 N=8", search::uniform_model(0.5, 8), trials / 16, 13, true);
  bench_case("direct calls, p=0.8 N=8", search::uniform_model(0.8, 8), trials, 14, true);
  return 0;
}
