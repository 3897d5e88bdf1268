// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "bdris/admm.hpp"
#include "bdris/metrics.hpp"
#include "bdris/result_io.hpp"

using namespace bdris;

namespace {

Instance desk(Architecture arch = Architecture::FullyConnected, std::optional<int> groups = {}) {
  RunSpec run;
  run.scenario = std::filesystem::path(BDRIS_SOURCE_DIR) / "scenarios" / "desk_default.cfg";
  run.arch = arch;
  run.groups = groups;
  return build_instance(run);
}

struct DeskPoint {
  Instance inst;
  Waveform wf;
  BdRisState state;
  FilterBank filters;
};

DeskPoint desk_point(Architecture arch = Architecture::FullyConnected, std::optional<int> groups = {}) {
  DeskPoint p{desk(arch, groups), {}, {}, {}};
  const auto& s = p.inst.scenario;
  std::mt19937_64 rng(1);
  p.state = init_bdris(s.groups, s.group_size(), s.arch, rng, 2.0);
  p.wf = draw_symbols(static_cast<int>(s.users.size()), s.code_len, s.psk_order, rng);
  p.wf.w = init_waveform(p.inst, p.state.phi_t, p.state.phi_r, p.wf.symbols).w;
  p.filters = update_filters(p.inst, p.wf.w, p.state.phi_t, p.state.phi_r);
  return p;
}

void BM_SocpBall(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  RVec c(n), x0(n);
  for (int i = 0; i < n; ++i) {
    c(i) = g(rng);
    x0(i) = g(rng);
  }
  SocpProblem p(n);
  p.set_objective(c);
  p.add_soc(RMat::Identity(n, n), -x0, RVec::Zero(n), 1.0);
  for (int i = 0; i < n; ++i) {
    RVec row = RVec::Zero(n);
    row(i) = 1.0;
    p.add_inequality(row, 2.0);
  }
  for (auto _ : st) benchmark::DoNotOptimize(solve_socp(p));
}
BENCHMARK(BM_SocpBall)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_UpdateFilters(benchmark::State& st) {
  const auto p = desk_point();
  for (auto _ : st) benchmark::DoNotOptimize(update_filters(p.inst, p.wf.w, p.state.phi_t, p.state.phi_r));
}
BENCHMARK(BM_UpdateFilters)->Unit(benchmark::kMillisecond);

void BM_UpdateWaveform(benchmark::State& st) {
  const auto p = desk_point();
  for (auto _ : st)
    benchmark::DoNotOptimize(update_waveform(p.inst, p.wf, p.state.phi_t, p.state.phi_r, p.filters, 1));
}
BENCHMARK(BM_UpdateWaveform)->Unit(benchmark::kMillisecond);

void BM_UpdatePhases(benchmark::State& st) {
  const int groups = static_cast<int>(st.range(0));
  const auto p = desk_point(Architecture::GroupConnected, groups);
  for (auto _ : st) {
    auto state = p.state;
    update_phases(p.inst, p.wf, p.filters, state, 1);
    benchmark::DoNotOptimize(state.phi_t.data());
  }
}
BENCHMARK(BM_UpdatePhases)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_AdmmIteration(benchmark::State& st) {
  const auto p = desk_point();
  const int groups = p.inst.scenario.groups;
  for (auto _ : st) {
    auto state = p.state;
    Waveform wf = p.wf;
    wf.w = update_waveform(p.inst, wf, state.phi_t, state.phi_r, p.filters, 1);
    const auto filters = update_filters(p.inst, wf.w, state.phi_t, state.phi_r);
    update_phases(p.inst, wf, filters, state, 1);
    update_thetas(state, groups);
    update_duals(state, groups);
    benchmark::DoNotOptimize(state.phi_t.data());
  }
}
BENCHMARK(BM_AdmmIteration)->Unit(benchmark::kMillisecond);

void BM_DeskSolve(benchmark::State& st) {
  const auto inst = desk(Architecture::SingleConnected);
  for (auto _ : st) benchmark::DoNotOptimize(solve(inst));
}
BENCHMARK(BM_DeskSolve)->Unit(benchmark::kSecond)->Iterations(1);

void BM_MarcumQ(benchmark::State& st) {
  double a = 0.0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(marcum_q1(a, 5.0));
    a = a > 10.0 ? 0.0 : a + 0.01;
  }
}
BENCHMARK(BM_MarcumQ);

void BM_Ber(benchmark::State& st) {
  std::mt19937_64 rng(1);
  for (auto _ : st) benchmark::DoNotOptimize(simulate_point_ber(cdouble(2.0, 1.0), 0, 4, 1.0, 10000, rng));
  st.SetItemsProcessed(st.iterations() * 10000);
}
BENCHMARK(BM_Ber);

}  // namespace

BENCHMARK_MAIN();
