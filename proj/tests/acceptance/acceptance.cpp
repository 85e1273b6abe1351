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
// Acceptance run: one PASS / FAIL / SKIP line per criterion.
//
//   acceptance [--only 1,4] [--expect-fail 8]
//
// Exit status is 0 when the set of failing criteria equals --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cdimf/consensus.hpp"
#include "cdimf/eval.hpp"
#include "cdimf/federation.hpp"
#include "cdimf/synthetic.hpp"
#include "cli/config.hpp"
#include "cli/pipeline.hpp"
#include "oracles.hpp"

using namespace cdimf;
using namespace std::chrono_literals;

namespace {

// Pinned tolerances and budgets.
constexpr double kRowTol = 1e-6;
constexpr double kGradTol = 1e-6;
constexpr double kMonotoneSlack = 1e-9;
constexpr double kResidualDrop = 10.0;
constexpr double kProxTol = 1e-12;
constexpr double kFederationTol = 1e-9;
constexpr double kCollapseCoverage = 0.05;
constexpr double kPaperTol = 1.5;  // HR@10, absolute points

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::kPass : Status::kFail, std::move(detail)}; }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

std::vector<DomainDataset> synthetic_pair(const SyntheticSpec& spec) {
  const auto logs = make_synthetic_logs(spec);
  const auto common = intersect_sorted(distinct_users(logs[0]), distinct_users(logs[1]));
  std::vector<DomainDataset> out;
  for (const auto& log : logs) out.push_back(build_dataset(log, common));
  return out;
}

// ---------------------------------------------------------------------------
// 1

Vector dense_row_oracle(const Matrix& opposite, const std::vector<int>& observed_mask, double alpha,
                        double lambda_row, double rho_eff, const Vector& h) {
  const Index d = opposite.cols();
  Matrix a = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  for (Index j = 0; j < opposite.rows(); ++j) {
    const Vector y = opposite.row(j).transpose();
    a += alpha * y * y.transpose();
    if (observed_mask[j]) {
      a += y * y.transpose();
      b += y;
    }
  }
  a += (lambda_row + rho_eff) * Matrix::Identity(d, d);
  b += rho_eff * h;
  return a.fullPivLu().solve(b);
}

Outcome solver_exactness() {
  Stopwatch clock;
  double worst_row = 0.0, worst_grad = 0.0;
  const double alphas[] = {0.0, 0.1, 1.0};
  const double lambdas[] = {0.01, 0.1};
  const double nus[] = {0.0, 0.5, 1.0};
  const double rhos[] = {0.0, 0.5};
  for (int instance = 0; instance < 50; ++instance) {
    std::mt19937_64 rng(1000 + instance);
    auto pick = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
    const Index n_users = pick(2, 10), n_items = pick(2, 10);
    SolverConfig c;
    c.d = pick(1, 3);
    c.alpha = alphas[pick(0, 2)];
    c.lambda = lambdas[pick(0, 1)];
    c.nu = nus[pick(0, 2)];
    c.sigma = 1.0;
    const double rho = rhos[pick(0, 1)];

    std::vector<Interaction> records;
    std::bernoulli_distribution coin(0.35);
    for (Index u = 0; u < n_users; ++u)
      for (Index i = 0; i < n_items; ++i)
        if (coin(rng) || (u + i) % n_items == 0)  // keep every user present
          records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), {}});
    std::vector<std::string> shared;
    for (Index u = 0; u < n_users; ++u)
      if (coin(rng)) shared.push_back("u" + std::to_string(u));
    const auto data = build_dataset(InteractionLog::from_records("x", records), shared);
    const auto p = oracle::dense_p(data);

    FactorModel model = init_model(data.n_users(), data.n_items(), c, 50 + instance);
    const Matrix target = random_matrix(static_cast<Index>(data.shared_rows.size()), c.d, rng);
    const Penalty penalty{rho, &target};
    std::vector<Index> shared_slot(data.n_users(), -1);
    for (std::size_t k = 0; k < data.shared_rows.size(); ++k) shared_slot[data.shared_rows[k]] = k;

    const Matrix x = update_users(model, data, penalty, 1);
    for (Index u = 0; u < data.n_users(); ++u) {
      const Index count = std::count(p[u].begin(), p[u].end(), 1);
      const bool is_shared = shared_slot[u] >= 0;
      const double rho_eff = is_shared || c.rho_on_private_users ? rho : 0.0;
      const Vector h = is_shared ? Vector(target.row(shared_slot[u]).transpose()) : Vector::Zero(c.d);
      const Vector want = dense_row_oracle(model.items.values, p[u], c.alpha,
                                           oracle::naive_reg(count, data.n_items(), c), rho_eff, h);
      worst_row = std::max(worst_row, (x.row(u).transpose() - want).cwiseAbs().maxCoeff());
    }
    model.users.values = x;
    const auto fx = [&](const Matrix& m) {
      FactorModel probe = model;
      probe.users.values = m;
      return local_objective(probe, data, penalty);
    };
    worst_grad = std::max(worst_grad, oracle::fd_gradient(fx, model.users.values).cwiseAbs().maxCoeff());

    const Matrix y = update_items(model, data, rho, 1);
    for (Index i = 0; i < data.n_items(); ++i) {
      std::vector<int> mask(data.n_users());
      for (Index u = 0; u < data.n_users(); ++u) mask[u] = p[u][i];
      const Index count = std::count(mask.begin(), mask.end(), 1);
      const double rho_eff = c.rho_on_items ? rho : 0.0;
      const Vector want = dense_row_oracle(model.users.values, mask, c.alpha,
                                           oracle::naive_reg(count, data.n_users(), c), rho_eff,
                                           Vector::Zero(c.d));
      worst_row = std::max(worst_row, (y.row(i).transpose() - want).cwiseAbs().maxCoeff());
    }
    model.items.values = y;
    const auto fy = [&](const Matrix& m) {
      FactorModel probe = model;
      probe.items.values = m;
      return local_objective(probe, data, penalty);
    };
    worst_grad = std::max(worst_grad, oracle::fd_gradient(fy, model.items.values).cwiseAbs().maxCoeff());
  }
  const double t = clock.seconds();
  return verdict(worst_row < kRowTol && worst_grad < kGradTol && t < 10.0,
                 "50 instances, max row error " + fmt("%.2e", worst_row) + ", max gradient " +
                     fmt("%.2e", worst_grad) + ", " + fmt("%.2f", t) + " s");
}

// ---------------------------------------------------------------------------
// 2 and 3

struct EquivalenceRun {
  bool identical = true;
  double worst_increase = -std::numeric_limits<double>::infinity();
  int half_sweeps = 0;
  double seconds = 0.0;
};

const EquivalenceRun& equivalence_run() {
  static const EquivalenceRun run = [] {
    Stopwatch clock;
    SyntheticSpec spec;
    spec.n_shared_users = 800;
    spec.n_private_users = 200;
    spec.n_items = 300;
    spec.seed = 4;
    const auto data = synthetic_pair(spec);
    SolverConfig c;
    c.d = 8;
    c.alpha = 0.01;
    c.lambda = 0.1;
    ConsensusConfig cc;
    cc.rho = 0.0;
    cc.outer_rounds = 10;
    const std::uint64_t seed = 99;

    EquivalenceRun r;
    std::vector<double> last(2, std::numeric_limits<double>::infinity());
    auto record = [&](int domain, double value) {
      r.worst_increase = std::max(r.worst_increase, value - last[domain]);
      last[domain] = value;
      ++r.half_sweeps;
    };
    TrainObserver observer;
    observer.on_half_sweep = [&](int domain, int, HalfSweep, const FactorModel& m, const Penalty& p) {
      record(domain, local_objective(m, data[domain], p));
    };
    std::vector<DomainSpec> specs{{&data[0], c}, {&data[1], c}};
    const auto joint = train(specs, cc, seed, observer);
    for (int i = 0; i < 2; ++i) {
      last.assign(2, std::numeric_limits<double>::infinity());
      const auto alone = train_als(data[i], c, 10, domain_seed(seed, i),
                                   [&](int, HalfSweep, const FactorModel& m) {
                                     record(i, local_objective(m, data[i], Penalty{}));
                                   });
      r.identical = r.identical && alone.users.values == joint.models[i].users.values &&
                    alone.items.values == joint.models[i].items.values;
    }
    r.seconds = clock.seconds();
    return r;
  }();
  return run;
}

Outcome rho_zero_equivalence() {
  const auto& r = equivalence_run();
  return verdict(r.identical && r.seconds < 30.0,
                 std::string(r.identical ? "bit-identical" : "factors differ") +
                     " factors, 2 domains x 1000 users, 10 epochs, " + fmt("%.2f", r.seconds) + " s");
}

Outcome monotonicity() {
  const auto& r = equivalence_run();
  return verdict(r.worst_increase <= kMonotoneSlack,
                 std::to_string(r.half_sweeps) + " half-sweeps, largest step change " +
                     fmt("%+.3e", r.worst_increase));
}

// ---------------------------------------------------------------------------
// 4

Outcome consensus_convergence() {
  Stopwatch clock;
  SyntheticSpec spec;  // 500 shared users, 200 items, d = 8
  const auto data = synthetic_pair(spec);
  SolverConfig c;
  c.d = 8;
  c.alpha = 0.01;
  c.lambda = 0.1;
  ConsensusConfig cc;
  cc.rho = 1.0;
  cc.outer_rounds = 30;
  std::vector<DomainSpec> specs{{&data[0], c}, {&data[1], c}};
  const auto result = train(specs, cc, 1);
  const double r3 = result.rounds.at(2).mean_residual();
  const double r30 = result.rounds.at(29).mean_residual();
  const double t = clock.seconds();
  return verdict(r3 / r30 >= kResidualDrop && t < 60.0,
                 "rho 1, residual " + fmt("%.4g", r3) + " at round 3, " + fmt("%.4g", r30) +
                     " at round 30 (" + fmt("%.1f", r3 / r30) + "x), " + fmt("%.2f", t) + " s");
}

// ---------------------------------------------------------------------------
// 5

Outcome prox_stationarity() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(0.0, 5.0), mu(0.1, 10.0);
  double worst = 0.0;
  bool identity = true;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix m = random_matrix(7, 4, rng, 3.0);
    const double l = lam(rng), u = mu(rng);
    const Matrix x = prox_l2(m, l, u);
    worst = std::max(worst, (l * x + (x - m) / u).cwiseAbs().maxCoeff());
    identity = identity && prox_l2(m, 0.0, u) == m;
  }
  return verdict(worst <= kProxTol && identity, "200 draws, max stationarity residual " + fmt("%.2e", worst) +
                                                    (identity ? ", lambda_g = 0 is the identity" : ", lambda_g = 0 changed values"));
}

// ---------------------------------------------------------------------------
// 6

Outcome federation_equivalence() {
  Stopwatch clock;
  SyntheticSpec spec;
  spec.n_shared_users = 200;
  spec.n_private_users = 40;
  spec.n_items = 120;
  spec.seed = 6;
  const auto data = synthetic_pair(spec);
  SolverConfig c;
  c.d = 8;
  c.alpha = 0.01;
  c.lambda = 0.1;
  ConsensusConfig cc;
  cc.rho = 0.5;
  cc.aggregation_period = 2;
  cc.outer_rounds = 5;
  const std::uint64_t seed = 17;

  std::mutex mutex;
  std::vector<std::uint8_t> wire;
  const WireTap tap = [&](TapDirection, std::span<const std::uint8_t> b) {
    std::lock_guard lock(mutex);
    wire.insert(wire.end(), b.begin(), b.end());
  };
  AggregatorOptions ao;
  ao.timeout = 60s;
  ao.tap = tap;
  Aggregator aggregator(cc, ao);
  auto session = std::async(std::launch::async, [&] { return aggregator.run(); });
  std::vector<std::future<WorkerResult>> workers;
  for (int i = 0; i < 2; ++i) {
    workers.push_back(std::async(std::launch::async, [&, i] {
      WorkerOptions wo;
      wo.aggregator_address = "127.0.0.1:" + std::to_string(aggregator.port());
      wo.domain_id = static_cast<std::uint32_t>(i);
      wo.timeout = 60s;
      wo.tap = tap;
      return run_worker(wo, data[i], c, cc, domain_seed(seed, i));
    }));
  }
  std::vector<WorkerResult> remote;
  for (auto& w : workers) remote.push_back(w.get());
  session.get();

  std::vector<DomainSpec> specs{{&data[0], c}, {&data[1], c}};
  const auto local = train(specs, cc, seed);
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    worst = std::max(worst, (remote[i].model.users.values - local.models[i].users.values).cwiseAbs().maxCoeff());
    worst = std::max(worst, (remote[i].model.items.values - local.models[i].items.values).cwiseAbs().maxCoeff());
  }
  std::size_t leaked = 0;
  for (const auto& d : data) {
    for (const auto* vocab : {&d.users, &d.items})
      for (const auto& id : vocab->ids())
        if (std::search(wire.begin(), wire.end(), id.begin(), id.end()) != wire.end()) ++leaked;
  }
  const double t = clock.seconds();
  return verdict(worst <= kFederationTol && leaked == 0 && !wire.empty() && t < 120.0,
                 "max factor difference " + fmt("%.2e", worst) + ", " + std::to_string(wire.size()) +
                     " wire bytes, " + std::to_string(leaked) + " ids found on the wire, " + fmt("%.2f", t) + " s");
}

// ---------------------------------------------------------------------------
// 7

Outcome metric_oracle() {
  std::mt19937_64 rng(7);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n_items = 300, d = 4;
    Matrix items = random_matrix(n_items, d, rng);
    Vector user = random_matrix(d, 1, rng);
    if (trial % 2 == 0) {  // coarse values so ties are common
      items = items.array().round();
      user = user.array().round();
    }
    std::vector<Index> cand(static_cast<std::size_t>(n_items));
    std::iota(cand.begin(), cand.end(), 0);
    std::shuffle(cand.begin(), cand.end(), rng);
    cand.resize(std::uniform_int_distribution<std::size_t>(1, 200)(rng));
    const Index k = std::uniform_int_distribution<Index>(1, 20)(rng);

    const Index want = oracle::full_sort_rank(user, items, cand);
    const Index got = rank_of_target(user, items, cand);
    const auto [hr, ndcg] = metrics_from_rank(got, k);
    double want_ndcg = 0.0;  // DCG with one relevant item; ideal DCG is 1
    for (Index pos = 1; pos <= std::min<Index>(k, static_cast<Index>(cand.size())); ++pos)
      if (pos == want) want_ndcg = 1.0 / std::log2(pos + 1.0);
    if (got != want || hr != (want <= k ? 1.0 : 0.0) || ndcg != want_ndcg) ++mismatches;
  }

  // null model: random user vectors, uniform target, 999 sampled negatives
  const Index n_cases = 10000, catalog = 3000;
  const Matrix items = random_matrix(catalog, 8, rng);
  EvalConfig ec;
  ec.seed = 11;
  std::uniform_int_distribution<Index> any_item(0, catalog - 1);
  double hits = 0.0;
  for (Index n = 0; n < n_cases; ++n) {
    const Index target = any_item(rng);
    std::vector<Index> cand{target};
    const auto negs = sample_negatives({}, target, catalog, ec, "case" + std::to_string(n));
    cand.insert(cand.end(), negs.begin(), negs.end());
    const Vector user = random_matrix(8, 1, rng);
    hits += metrics_from_rank(rank_of_target(user, items, cand), 10).first;
  }
  const double hr = hits / n_cases;
  const double sigma = std::sqrt(0.01 * 0.99 / n_cases);
  return verdict(mismatches == 0 && std::abs(hr - 0.01) <= 3 * sigma,
                 std::to_string(mismatches) + " rank/metric mismatches in 1000 cases, null HR@10 " + fmt("%.4f", hr) +
                     " (0.01 +- " + fmt("%.4f", 3 * sigma) + ")");
}

// ---------------------------------------------------------------------------
// synthetic suite shared by 8 and 10

struct Suite {
  std::vector<SplitBundle> splits;
  SolverConfig solver;
  std::uint64_t seed;
};

std::unique_ptr<Suite> make_suite(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_shared_users = 3000;
  spec.n_items = 1500;
  spec.d = 8;
  spec.popularity = 1.0;
  spec.seed = seed;
  auto s = std::make_unique<Suite>();
  s->splits = make_warm_splits(make_synthetic_logs(spec), seed, true);
  s->solver.d = 8;
  s->solver.alpha = 0.01;
  s->solver.lambda = 0.1;
  s->seed = seed;
  return s;
}

struct SuiteScore {
  double ndcg = 0.0;      // mean over domains, validation
  double coverage = 0.0;  // max over domains
  bool diverged = false;
};

SuiteScore score_suite(const Suite& s, double rho, int period, int epochs = 10) {
  ConsensusConfig cc;
  cc.rho = rho;
  cc.aggregation_period = period;
  cc.outer_rounds = epochs / period;
  std::vector<DomainSpec> specs;
  for (const auto& b : s.splits) specs.push_back({&b.train, s.solver});
  const auto result = train(specs, cc, s.seed);
  SuiteScore score;
  score.diverged = result.diverged;
  EvalConfig ec;
  ec.seed = s.seed;
  for (std::size_t i = 0; i < s.splits.size(); ++i) {
    const auto r = evaluate_warm(result.models[i], s.splits[i].train, s.splits[i].validation, ec);
    score.ndcg += r.ndcg / static_cast<double>(s.splits.size());
    score.coverage = std::max(score.coverage, r.coverage);
  }
  return score;
}

const Suite& base_suite() {
  static const auto suite = make_suite(1);
  return *suite;
}

double tuned_rho() {
  static const double rho = [] {
    double best = 0.0, best_ndcg = -1.0;
    for (double rho : {0.1, 0.3, 1.0, 3.0, 10.0}) {
      const double ndcg = score_suite(base_suite(), rho, 1).ndcg;
      if (ndcg > best_ndcg) best_ndcg = ndcg, best = rho;
    }
    return best;
  }();
  return rho;
}

// ---------------------------------------------------------------------------
// 8

Outcome divergence_regime() {
  const double rho = tuned_rho();
  const auto tuned = score_suite(base_suite(), rho, 1);
  const auto mid = score_suite(base_suite(), 30 * rho, 1);
  const auto high = score_suite(base_suite(), 100 * rho, 1);
  const bool ok = high.diverged || high.coverage < kCollapseCoverage;
  return verdict(ok, "tuned rho " + fmt("%g", rho) + ": coverage@10 " + fmt("%.3f", tuned.coverage) + "; at 30x " +
                         fmt("%.3f", mid.coverage) + "; at 100x " + fmt("%.3f", high.coverage) +
                         (high.diverged ? " (diverged)" : " (not diverged)") + ", threshold " +
                         fmt("%.2f", kCollapseCoverage));
}

// ---------------------------------------------------------------------------
// 9

Outcome paper_reproduction() {
  const char* root = std::getenv("CDIMF_PAPER_DATA");
  if (!root || !*root)
    return {Status::kSkip, "set CDIMF_PAPER_DATA to the prepared Sport&Cloth splits "
                           "(<dir>/{warm,cold}/{sport,cloth}/{train,valid,test}.tsv)"};
  using namespace cdimf::cli;
  const fs::path data(root);
  const fs::path configs = fs::path(CDIMF_SOURCE_DIR) / "configs";
  struct Expect {
    const char* scenario;
    Mode mode;
    const char* domain;
    double hr;
  };
  const Expect expected[] = {{"warm", Mode::kCdimf, "sport", 23.85}, {"warm", Mode::kCdimf, "cloth", 20.74},
                             {"warm", Mode::kAlsJoined, "sport", 25.69}, {"warm", Mode::kAlsJoined, "cloth", 22.15},
                             {"cold", Mode::kCdimf, "sport", 14.52}, {"cold", Mode::kCdimf, "cloth", 13.35}};
  auto load_scenario = [&](const std::string& scenario) {
    std::vector<std::string> sets;
    for (const char* domain : {"sport", "cloth"}) {
      for (const char* split : {"train", "valid", "test"}) {
        const auto path = data / scenario / domain / (std::string(split) + ".tsv");
        const std::string key = "domains." + std::string(domain) + "." + split + "=";
        if (std::string(split) == "valid" && !fs::exists(path))
          sets.push_back(key + "null");
        else
          sets.push_back(key + json(path.string()).dump());
      }
    }
    return load_run_config(configs / ("sport_cloth_" + scenario + ".json"), sets);
  };
  std::ostringstream detail;
  bool ok = true;
  for (const char* scenario : {"warm", "cold"}) {
    const auto config = load_scenario(scenario);
    const auto domains = load_domains(config);
    for (Mode mode : {Mode::kCdimf, Mode::kAlsJoined}) {
      if (std::string(scenario) == "cold" && mode == Mode::kAlsJoined) continue;
      RunOptions ro;
      ro.mode = mode;
      const auto outcome = run_training(config, domains, ro);
      const auto cases = evaluate_models(config.scenario, outcome.models, domains, Split::kTest, config.eval,
                                         config.threads);
      for (const auto& e : expected) {
        if (std::string(e.scenario) != scenario || e.mode != mode) continue;
        const auto it = std::find_if(cases.begin(), cases.end(), [&](const EvalCase& c) { return c.target == e.domain; });
        if (it == cases.end()) {
          ok = false;
          detail << scenario << "/" << to_string(mode) << "/" << e.domain << " missing; ";
          continue;
        }
        const double hr = 100.0 * it->report.hr;
        ok = ok && std::abs(hr - e.hr) <= kPaperTol;
        detail << scenario << " " << to_string(mode) << " " << e.domain << " " << fmt("%.2f", hr) << " vs "
               << fmt("%.2f", e.hr) << "; ";
      }
    }
  }
  return verdict(ok, detail.str());
}

// ---------------------------------------------------------------------------
// 10

Outcome aggregation_period_trend() {
  const double rho = tuned_rho();
  double ap1 = 0.0, ap5 = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto suite = seed == 1 ? nullptr : make_suite(seed);
    const Suite& s = suite ? *suite : base_suite();
    ap1 += score_suite(s, rho, 1).ndcg / 5.0;
    ap5 += score_suite(s, rho, 5).ndcg / 5.0;
  }
  return verdict(ap1 >= ap5, "rho " + fmt("%g", rho) + ", mean validation NDCG@10 at epoch 10: AP=1 " +
                                 fmt("%.4f", ap1) + ", AP=5 " + fmt("%.4f", ap5));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdimf acceptance criteria"};
  std::vector<int> only, expect_fail;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"solver exactness", solver_exactness},
      {"rho = 0 equals per-domain ALS", rho_zero_equivalence},
      {"block-descent monotonicity", monotonicity},
      {"consensus convergence", consensus_convergence},
      {"prox-L2 stationarity", prox_stationarity},
      {"federation equivalence", federation_equivalence},
      {"metric oracle", metric_oracle},
      {"coverage collapse at 100x rho", divergence_regime},
      {"Sport&Cloth reproduction", paper_reproduction},
      {"aggregation-period trend", aggregation_period_trend},
  };
  std::set<int> failed;
  for (std::size_t n = 0; n < criteria.size(); ++n) {
    const int id = static_cast<int>(n) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[n].second();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("error: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    if (o.status == Status::kFail) failed.insert(id);
    std::cout << "criterion " << id << " " << tag << "  " << criteria[n].first << ": " << o.detail << std::endl;
  }
  std::set<int> expected;
  for (int id : expect_fail)
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) expected.insert(id);
  if (failed != expected) {
    for (int id : expected)
      if (!failed.count(id)) std::cout << "note: criterion " << id << " was expected to fail but did not" << std::endl;
    return 1;
  }
  return 0;
}
