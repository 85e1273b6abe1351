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
#include "cdimf/consensus.hpp"

#include <chrono>
#include <numeric>

#include "cdimf/error.hpp"

namespace cdimf {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

}  // namespace

void ConsensusConfig::validate() const {
  if (!(rho >= 0.0)) throw ConfigError("consensus: rho must be >= 0");
  if (aggregation_period < 1) throw ConfigError("consensus: aggregation_period must be >= 1");
  if (outer_rounds < 0) throw ConfigError("consensus: outer_rounds must be >= 0");
  if (n_domains < 1) throw ConfigError("consensus: n_domains must be >= 1");
  if (prox.kind == ProxConfig::Kind::kL2 && !(prox.lambda_g >= 0.0)) {
    throw ConfigError("consensus: lambda_g must be >= 0");
  }
}

ConsensusState ConsensusState::zeros(std::vector<std::string> alignment, int n_domains, Index d) {
  ConsensusState state;
  const auto s = static_cast<Index>(alignment.size());
  state.z = Matrix::Zero(s, d);
  state.duals.assign(static_cast<std::size_t>(n_domains), Matrix::Zero(s, d));
  state.alignment = std::move(alignment);
  return state;
}

double RoundDiagnostics::mean_residual() const {
  if (primal_residuals.empty()) return 0.0;
  return std::accumulate(primal_residuals.begin(), primal_residuals.end(), 0.0) /
         static_cast<double>(primal_residuals.size());
}

Matrix prox_identity(const Matrix& m) { return m; }

Matrix prox_l2(const Matrix& m, double lambda_g, double mu) {
  if (!(mu > 0.0)) throw ConfigError("prox_l2: mu must be > 0");
  if (!(lambda_g >= 0.0)) throw ConfigError("prox_l2: lambda_g must be >= 0");
  if (lambda_g == 0.0) return m;
  return m / (1.0 + lambda_g * mu);
}

Matrix apply_prox(const Matrix& m, const ProxConfig& prox, double mu) {
  switch (prox.kind) {
    case ProxConfig::Kind::kIdentity:
      return prox_identity(m);
    case ProxConfig::Kind::kL2:
      return prox_l2(m, prox.lambda_g, mu);
  }
  throw ConfigError("unknown proximal operator");
}

Matrix aggregate(std::span<const Matrix> shares, const ConsensusConfig& config) {
  if (shares.empty()) throw ConfigError("aggregate: no shares");
  Matrix sum = shares[0];
  for (std::size_t k = 1; k < shares.size(); ++k) {
    require_same_shape(shares[0], shares[k], "aggregate");
    sum += shares[k];
  }
  const auto n = static_cast<double>(shares.size());
  const Matrix mean = sum / n;
  if (config.prox.kind == ProxConfig::Kind::kIdentity) return mean;
  if (!(config.rho > 0.0)) throw ConfigError("aggregate: the L2 prox needs rho > 0");
  return apply_prox(mean, config.prox, 1.0 / (config.rho * n));
}

Matrix dual_update(const Matrix& u, const Matrix& x, const Matrix& z) {
  require_same_shape(u, x, "dual_update");
  require_same_shape(u, z, "dual_update");
  return u + x - z;
}

double primal_residual(const Matrix& x, const Matrix& z) {
  require_same_shape(x, z, "primal_residual");
  return (x - z).norm();
}

Matrix gather_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

std::vector<std::string> common_alignment(std::span<const DomainDataset* const> domains) {
  if (domains.empty()) throw ConfigError("no domains");
  std::vector<std::string> alignment = domains[0]->shared_user_ids();
  for (std::size_t k = 1; k < domains.size(); ++k) {
    if (domains[k]->shared_user_ids() != alignment) {
      throw DataError("domains '" + domains[0]->name + "' and '" + domains[k]->name +
                      "' declare different shared user sets");
    }
  }
  return alignment;
}

LocalDomain::LocalDomain(const DomainDataset& data, const SolverConfig& config, std::uint64_t seed,
                         int threads)
    : data_(&data),
      model_(init_model(data.n_users(), data.n_items(), config, seed)),
      dual_(Matrix::Zero(static_cast<Index>(data.shared_rows.size()), config.d)),
      threads_(threads) {}

bool LocalDomain::local_epoch(double rho, const Matrix* z, const HalfSweepHook& hook) {
  Matrix pull_target;
  Penalty penalty{rho, nullptr};
  if (rho != 0.0 && z != nullptr) {
    pull_target = target(*z);
    penalty.target = &pull_target;
  }
  FactorModel next = model_;
  try {
    next.users.values = update_users(next, *data_, penalty, threads_);
    if (!next.users.all_finite()) return false;
    if (hook) hook(HalfSweep::kUsers, next, penalty);
    next.items.values = update_items(next, *data_, rho, threads_);
    if (!next.items.all_finite()) return false;
    if (hook) hook(HalfSweep::kItems, next, penalty);
  } catch (const NumericError&) {
    return false;
  }
  model_ = std::move(next);
  ++epochs_;
  return true;
}

Matrix LocalDomain::share() const { return gather_rows(model_.users.values, data_->shared_rows) + dual_; }

void LocalDomain::absorb_global(const Matrix& z) {
  dual_ = dual_update(dual_, gather_rows(model_.users.values, data_->shared_rows), z);
}

Matrix LocalDomain::target(const Matrix& z) const {
  if (z.rows() != dual_.rows() || z.cols() != dual_.cols()) {
    throw ConfigError("global factors do not match the local shared set");
  }
  return z - dual_;
}

TrainResult train(std::span<const DomainSpec> domains, const ConsensusConfig& config,
                  std::uint64_t seed, const TrainObserver& observer, int threads) {
  config.validate();
  if (domains.empty()) throw ConfigError("train: no domains");
  std::vector<const DomainDataset*> datasets;
  for (const auto& spec : domains) {
    spec.solver.validate();
    if (spec.solver.d != domains[0].solver.d) throw ConfigError("train: all domains need the same d");
    datasets.push_back(spec.data);
  }
  const Index d = domains[0].solver.d;
  const int n = static_cast<int>(domains.size());

  TrainResult result;
  result.state = ConsensusState::zeros(common_alignment(datasets), n, d);
  std::vector<LocalDomain> locals;
  locals.reserve(domains.size());
  for (int i = 0; i < n; ++i) {
    locals.emplace_back(*domains[static_cast<std::size_t>(i)].data,
                        domains[static_cast<std::size_t>(i)].solver, domain_seed(seed, i), threads);
  }
  const bool exchange = config.rho > 0.0 && !result.state.alignment.empty();
  std::vector<Penalty> last_penalty(static_cast<std::size_t>(n));
  std::vector<Matrix> last_target(static_cast<std::size_t>(n));
  const auto start = std::chrono::steady_clock::now();

  for (int round = 1; round <= config.outer_rounds && !result.diverged; ++round) {
    for (int step = 1; step <= config.aggregation_period && !result.diverged; ++step) {
      const int epoch = (round - 1) * config.aggregation_period + step;
      for (int i = 0; i < n; ++i) {
        auto& local = locals[static_cast<std::size_t>(i)];
        LocalDomain::HalfSweepHook hook;
        if (observer.on_half_sweep) {
          hook = [&, i, epoch](HalfSweep side, const FactorModel& model, const Penalty& penalty) {
            observer.on_half_sweep(i, epoch, side, model, penalty);
          };
        }
        const Matrix* z = exchange ? &result.state.z : nullptr;
        if (!local.local_epoch(config.rho, z, hook)) {
          result.diverged = true;
          break;
        }
        if (z != nullptr) {
          last_target[static_cast<std::size_t>(i)] = local.target(*z);
          last_penalty[static_cast<std::size_t>(i)] = {config.rho, &last_target[static_cast<std::size_t>(i)]};
        } else {
          last_penalty[static_cast<std::size_t>(i)] = {config.rho, nullptr};
        }
      }
      if (result.diverged) break;
      const bool closes_round = step == config.aggregation_period;
      if (closes_round && exchange) {
        std::vector<Matrix> shares;
        shares.reserve(locals.size());
        for (const auto& local : locals) shares.push_back(local.share());
        result.state.z = aggregate(shares, config);
        for (auto& local : locals) local.absorb_global(result.state.z);
      }
      if (observer.on_epoch) observer.on_epoch(epoch, closes_round && exchange, locals);
    }

    RoundDiagnostics diag;
    diag.round = round;
    diag.diverged = result.diverged;
    diag.epoch = locals[0].epochs_done();
    for (int i = 0; i < n; ++i) {
      const auto& local = locals[static_cast<std::size_t>(i)];
      diag.primal_residuals.push_back(primal_residual(
          gather_rows(local.model().users.values, local.data().shared_rows), result.state.z));
      diag.objectives.push_back(
          local_objective(local.model(), local.data(), last_penalty[static_cast<std::size_t>(i)]));
    }
    diag.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.rounds.push_back(std::move(diag));
  }

  for (std::size_t i = 0; i < locals.size(); ++i) {
    result.models.push_back(locals[i].model());
    result.state.duals[i] = locals[i].dual();
  }
  return result;
}

}  // namespace cdimf
