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
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdimf/dataio.hpp"
#include "cdimf/solver.hpp"
#include "cdimf/types.hpp"

namespace cdimf {

struct ProxConfig {
  enum class Kind { kIdentity, kL2 };
  Kind kind = Kind::kIdentity;
  /// Weight of (lambda_g / 2) ||Z||^2 for Kind::kL2.
  double lambda_g = 0.0;
};

struct ConsensusConfig {
  /// Sharing (penalty) parameter. 0 disables every exchange.
  double rho = 0.0;
  ProxConfig prox;
  /// Local epochs between exchanges.
  int aggregation_period = 1;
  int outer_rounds = 10;
  int n_domains = 2;

  void validate() const;
  int total_epochs() const { return aggregation_period * outer_rounds; }
};

/// Global shared-user factors and per-domain duals, all indexed by the same
/// sorted list of shared user ids.
struct ConsensusState {
  Matrix z;
  std::vector<Matrix> duals;
  std::vector<std::string> alignment;

  /// Z = 0 and U_i = 0.
  static ConsensusState zeros(std::vector<std::string> alignment, int n_domains, Index d);
};

struct RoundDiagnostics {
  int round = 0;
  /// Local epochs completed when the round closed.
  int epoch = 0;
  /// ||X_i - Z||_F on the shared rows, per domain.
  std::vector<double> primal_residuals;
  /// local_objective per domain, evaluated against the penalty target of the
  /// round's last local epoch.
  std::vector<double> objectives;
  bool diverged = false;
  double elapsed_ms = 0.0;

  double mean_residual() const;
};

Matrix prox_identity(const Matrix& m);

/// argmin_X (lambda_g / 2) ||X||^2 + (1 / (2 mu)) ||X - m||^2 = m / (1 + lambda_g mu).
Matrix prox_l2(const Matrix& m, double lambda_g, double mu);

Matrix apply_prox(const Matrix& m, const ProxConfig& prox, double mu);

/// Z = prox(mean of shares) with mu = 1 / (rho N). Shares are summed in the
/// given order, so callers pass them ordered by domain id.
Matrix aggregate(std::span<const Matrix> shares, const ConsensusConfig& config);

/// u + x - z.
Matrix dual_update(const Matrix& u, const Matrix& x, const Matrix& z);

/// ||x - z||_F.
double primal_residual(const Matrix& x, const Matrix& z);

/// Rows of \p m listed in \p rows, in order.
Matrix gather_rows(const Matrix& m, std::span<const Index> rows);

/// The shared user ids common to all domains. Throws DataError unless every
/// domain declares the identical shared set.
std::vector<std::string> common_alignment(std::span<const DomainDataset* const> domains);

/// Seed of the i-th domain's factor initialization.
inline std::uint64_t domain_seed(std::uint64_t base, int domain) {
  return base + static_cast<std::uint64_t>(domain);
}

/// One domain's side of the consensus iteration: its local model and dual.
/// Used both in-process and by federation workers, so both paths perform the
/// same arithmetic.
class LocalDomain {
 public:
  LocalDomain(const DomainDataset& data, const SolverConfig& config, std::uint64_t seed,
              int threads = 0);

  using HalfSweepHook = std::function<void(HalfSweep, const FactorModel&, const Penalty&)>;

  /// One users-then-items epoch; shared rows are pulled toward Z - U when
  /// \p z is given, toward 0 otherwise. Returns false, keeping the previous
  /// model, if a non-finite value appears.
  bool local_epoch(double rho, const Matrix* z, const HalfSweepHook& hook = {});

  /// X_i + U_i on the shared rows.
  Matrix share() const;

  /// U_i += X_i - Z on the shared rows.
  void absorb_global(const Matrix& z);

  /// Z - U_i, the pull target of the next local epoch.
  Matrix target(const Matrix& z) const;

  const FactorModel& model() const { return model_; }
  FactorModel& model() { return model_; }
  const Matrix& dual() const { return dual_; }
  Matrix& dual() { return dual_; }
  const DomainDataset& data() const { return *data_; }
  int epochs_done() const { return epochs_; }

 private:
  const DomainDataset* data_;
  FactorModel model_;
  Matrix dual_;
  int epochs_ = 0;
  int threads_;
};

struct TrainObserver {
  /// After every half-sweep of every domain, with the penalty that sweep used.
  std::function<void(int domain, int epoch, HalfSweep side, const FactorModel& model,
                     const Penalty& penalty)>
      on_half_sweep;
  /// After every local epoch of all domains; \p exchanged marks epochs that
  /// closed a round.
  std::function<void(int epoch, bool exchanged, std::span<const LocalDomain> domains)> on_epoch;
};

struct DomainSpec {
  const DomainDataset* data = nullptr;
  SolverConfig solver;
};

struct TrainResult {
  std::vector<FactorModel> models;
  std::vector<RoundDiagnostics> rounds;
  ConsensusState state;
  bool diverged = false;
};

/// Runs outer_rounds rounds of aggregation_period local epochs followed by an
/// aggregate and dual update. Domain i initializes with domain_seed(seed, i).
/// With rho = 0 no exchange happens and every domain runs plain ALS. On
/// divergence training stops, the last finite models are returned and the
/// final diagnostics carry diverged = true.
TrainResult train(std::span<const DomainSpec> domains, const ConsensusConfig& config,
                  std::uint64_t seed, const TrainObserver& observer = {}, int threads = 0);

}  // namespace cdimf
