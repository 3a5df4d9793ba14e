// Serial reference vs OpenMP version of the three hot kernels.

#include <benchmark/benchmark.h>

#include "cfl/kernels.hpp"

namespace {

using namespace cfl;

void BM_ShotsSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(kernels::count_shots_serial(0.3, st.range(0), 7, 3));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ShotsParallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(kernels::count_shots_parallel(0.3, st.range(0), 7, 3));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

MultiCoulomb two_centers() { return {{{1.0, {3.1, 4.2, 5.3}}, {2.0, {11.7, 10.9, 9.4}}}}; }

void BM_FieldSerial(benchmark::State& st) {
  const BoxGrid g = build_grid(16.0, static_cast<int>(st.range(0)), 3);
  const Profile p = Profile::bump(3);
  const MultiCoulomb V = two_centers();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::coulomb_field_serial(g, p, V));
  st.SetItemsProcessed(st.iterations() * g.box_count());
}

void BM_FieldParallel(benchmark::State& st) {
  const BoxGrid g = build_grid(16.0, static_cast<int>(st.range(0)), 3);
  const Profile p = Profile::bump(3);
  const MultiCoulomb V = two_centers();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::coulomb_field_parallel(g, p, V));
  st.SetItemsProcessed(st.iterations() * g.box_count());
}

const std::vector<Point> kFreqs{{0.0, 0, 0}, {0.13, 0, 0}, {-0.13, 0, 0}, {0.31, 0, 0}};

void BM_OverlapSerial(benchmark::State& st) {
  const BoxGrid g = build_grid(static_cast<double>(st.range(0)), static_cast<int>(st.range(0)), 1);
  const Profile p = Profile::bump(1);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::trig_overlap_serial(g, p, kFreqs, 1e-10));
  st.SetItemsProcessed(st.iterations() * g.box_count() * static_cast<long>(kFreqs.size()));
}

void BM_OverlapParallel(benchmark::State& st) {
  const BoxGrid g = build_grid(static_cast<double>(st.range(0)), static_cast<int>(st.range(0)), 1);
  const Profile p = Profile::bump(1);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::trig_overlap_parallel(g, p, kFreqs, 1e-10));
  st.SetItemsProcessed(st.iterations() * g.box_count() * static_cast<long>(kFreqs.size()));
}

}  // namespace

BENCHMARK(BM_ShotsSerial)->Arg(1 << 20)->Arg(1 << 24);
BENCHMARK(BM_ShotsParallel)->Arg(1 << 20)->Arg(1 << 24);
BENCHMARK(BM_FieldSerial)->Arg(32)->Arg(64);
BENCHMARK(BM_FieldParallel)->Arg(32)->Arg(64);
BENCHMARK(BM_OverlapSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_OverlapParallel)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
