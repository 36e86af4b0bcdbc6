// Right-hand-side evaluation cost across graph sizes. All four brackets are
// expected to stay linear in |V| + |E| + |T| (the scaling acceptance check
// lives in the test suite; this target is for profiling).

#include "benchmark/benchmark.h"

#include "bracketdyn/bracket.hpp"
#include "bracketdyn/graphs.hpp"

using namespace bracketdyn;

namespace {

struct Fixture {
  CliqueComplex cx;
  BracketSystem sys;
  State x;

  Fixture(BracketKind kind, int n) {
    Rng rng(17);
    cx = build_complex(n, triangulated_ring(n).edges);
    sys.kind = kind;
    sys.cx = &cx;
    sys.cfg.embed_dim = 8;
    const int f = 8;
    sys.attn.wk = {rng.normal_mat(8, f, 0.4)};
    sys.attn.wq = {rng.normal_mat(8, f, 0.4)};
    if (kind == BracketKind::kMetriplectic) {
      auto net = [&](Mlp& m) {
        m.w = {rng.normal_mat(f, f, 0.4), rng.normal_mat(1, f, 0.4)};
        m.b = {Mat(1, f), Mat(1, 1)};
      };
      net(sys.nets.f_e);
      net(sys.nets.g_e);
      net(sys.nets.g_s);
    }
    x = State{rng.normal_mat(cx.n, f), rng.normal_mat(cx.count(1), f)};
  }
};

void bench_rhs(benchmark::State& state, BracketKind kind) {
  Fixture fx(kind, int(state.range(0)));
  for (auto _ : state) {
    State out = fx.sys.rhs(fx.x);
    benchmark::DoNotOptimize(out.q.data());
    benchmark::DoNotOptimize(out.p.data());
  }
  state.SetComplexityN(state.range(0));
}

} // namespace

BENCHMARK_CAPTURE(bench_rhs, hamiltonian, BracketKind::kHamiltonian)
    ->RangeMultiplier(2)
    ->Range(100, 1600)
    ->Complexity();
BENCHMARK_CAPTURE(bench_rhs, gradient, BracketKind::kGradient)
    ->RangeMultiplier(2)
    ->Range(100, 1600)
    ->Complexity();
BENCHMARK_CAPTURE(bench_rhs, double_bracket, BracketKind::kDoubleBracket)
    ->RangeMultiplier(2)
    ->Range(100, 1600)
    ->Complexity();
BENCHMARK_CAPTURE(bench_rhs, metriplectic, BracketKind::kMetriplectic)
    ->RangeMultiplier(2)
    ->Range(100, 1600)
    ->Complexity();

BENCHMARK_MAIN();
