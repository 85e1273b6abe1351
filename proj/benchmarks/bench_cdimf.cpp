// Copyright 2026 The CDIMF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <benchmark/benchmark.h>

#include <random>

#include "cdimf/consensus.hpp"
#include "cdimf/eval.hpp"
#include "cdimf/synthetic.hpp"

using namespace cdimf;

namespace {

Matrix random_factors(Index rows, Index d) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.1);
  Matrix m(rows, d);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = n(rng);
  return m;
}

struct Fixture {
  std::vector<SplitBundle> splits;
  SolverConfig solver;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    SyntheticSpec spec;
    spec.n_shared_users = 3000;
    spec.n_items = 1500;
    Fixture out;
    out.splits = make_warm_splits(make_synthetic_logs(spec), 1, false);
    out.solver.d = 32;
    out.solver.alpha = 0.01;
    out.solver.lambda = 0.1;
    return out;
  }();
  return f;
}

}  // namespace

static void BM_Gramian(benchmark::State& state) {
  const Matrix f = random_factors(20000, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gramian(f));
  state.SetItemsProcessed(state.iterations() * f.rows());
}
BENCHMARK(BM_Gramian)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_UserHalfSweep(benchmark::State& state) {
  const auto& f = fixture();
  SolverConfig c = f.solver;
  c.d = state.range(0);
  const auto& data = f.splits[0].train;
  const auto model = init_model(data.n_users(), data.n_items(), c, 1);
  const Matrix target = Matrix::Zero(static_cast<Index>(data.shared_rows.size()), c.d);
  const Penalty p{1.0, &target};
  for (auto _ : state) benchmark::DoNotOptimize(update_users(model, data, p));
  state.SetItemsProcessed(state.iterations() * data.n_users());
}
BENCHMARK(BM_UserHalfSweep)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_ConsensusRound(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<DomainSpec> specs;
  for (const auto& b : f.splits) specs.push_back({&b.train, f.solver});
  ConsensusConfig cc;
  cc.rho = 1.0;
  cc.outer_rounds = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(specs, cc, 1));
}
BENCHMARK(BM_ConsensusRound)->Unit(benchmark::kMillisecond);

static void BM_EvaluateWarm(benchmark::State& state) {
  const auto& f = fixture();
  const auto& b = f.splits[0];
  const auto model = init_model(b.train.n_users(), b.train.n_items(), f.solver, 2);
  EvalConfig ec;
  ec.n_negatives = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_warm(model, b.train, b.test, ec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.test.records.size()));
}
BENCHMARK(BM_EvaluateWarm)->Arg(99)->Arg(999)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
