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
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cdimf/dataio.hpp"
#include "cdimf/types.hpp"

namespace cdimf {

/// Hyperparameters of the local implicit ALS solver.
struct SolverConfig {
  Index d = 64;
  /// Weight of the all-pairs term pushing unobserved scores toward 0.
  double alpha = 0.0;
  double lambda = 0.0;
  /// Frequency-scaling exponent of the per-row regularization, in [0, 1].
  double nu = 0.0;
  /// Init standard deviation before the 1/sqrt(d) normalization.
  double sigma = 0.1;
  /// Apply the rho penalty (toward 0) to users outside the shared set.
  bool rho_on_private_users = true;
  /// Apply the rho penalty (toward 0) to item rows.
  bool rho_on_items = true;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

enum class FactorRole : std::uint8_t { kUser = 0, kItem = 1 };

struct FactorMatrix {
  Matrix values;
  FactorRole role = FactorRole::kUser;

  Index rows() const { return values.rows(); }
  Index dim() const { return values.cols(); }
  bool all_finite() const { return values.allFinite(); }
};

struct FactorModel {
  FactorMatrix users{Matrix(), FactorRole::kUser};
  FactorMatrix items{Matrix(), FactorRole::kItem};
  SolverConfig config;
};

/// n x d matrix of i.i.d. N(0, sigma / sqrt(d)) entries drawn from \p rng.
FactorMatrix init_factors(Index n, FactorRole role, const SolverConfig& config, std::mt19937_64& rng);
FactorMatrix init_factors(Index n, FactorRole role, const SolverConfig& config, std::uint64_t seed);

/// Users first, then items, from one generator seeded with \p seed.
FactorModel init_model(Index n_users, Index n_items, const SolverConfig& config, std::uint64_t seed);

/// lambda * (own_count + alpha * opposite_catalog)^nu, with 0^0 = 1.
double reg_weight(Index own_count, Index opposite_catalog, const SolverConfig& config);

/// F^T F.
Matrix gramian(const Matrix& factors);

/// Solves one row of the block-coordinate step:
///
///   (sum_j y_j y_j^T + alpha G + (lambda_row + rho_eff) I) a = sum_j y_j + rho_eff h
///
/// where y_j are the rows of \p opposite listed in \p observed, G is \p gram
/// and an empty \p target stands for h = 0. Uses a Cholesky factorization;
/// throws NumericError on non-finite input or a system that is not SPD.
Vector solve_row(const Matrix& opposite, std::span<const Index> observed, const Matrix& gram,
                 double alpha, double lambda_row, double rho_eff,
                 std::span<const double> target = {});

/// Pull applied to the user rows during a sweep. \p target has one row per
/// entry of DomainDataset::shared_rows (same order) and may be null when rho
/// is 0 or the shared set is empty, in which case shared users are pulled
/// toward 0.
struct Penalty {
  double rho = 0.0;
  const Matrix* target = nullptr;
};

/// Re-solves every user row against the current item factors. Rows are
/// independent; \p threads = 0 uses the runtime default, 1 runs serially.
/// The result does not depend on the thread count.
Matrix update_users(const FactorModel& model, const DomainDataset& data, const Penalty& penalty,
                    int threads = 0);

/// Re-solves every item row against the current user factors. Items are
/// pulled toward 0 with weight rho when config.rho_on_items is set.
Matrix update_items(const FactorModel& model, const DomainDataset& data, double rho,
                    int threads = 0);

/// 1/2 (L_S + L_I + R) plus rho/2 times the squared distance of each
/// penalized row to its target (shared users to the penalty target, private
/// users and items to 0 when their flags are set).
double local_objective(const FactorModel& model, const DomainDataset& data, const Penalty& penalty);

enum class HalfSweep { kUsers, kItems };

/// Called after each half-sweep with the 1-based epoch.
using SweepObserver = std::function<void(int epoch, HalfSweep side, const FactorModel& model)>;

/// Plain single-domain implicit ALS: init_model(seed), then \p epochs of
/// users-then-items sweeps with no penalty.
FactorModel train_als(const DomainDataset& data, const SolverConfig& config, int epochs,
                      std::uint64_t seed, const SweepObserver& observer = {}, int threads = 0);

/// Flat binary factor file: "CDMF", u32 version, u8 role, u64 n, u64 d,
/// then n*d little-endian doubles, row-major.
std::vector<std::uint8_t> encode_factors(const FactorMatrix& factors);
FactorMatrix decode_factors(std::span<const std::uint8_t> bytes);

/// Refuses to write non-finite matrices (DivergenceError).
void save_factors(const std::filesystem::path& path, const FactorMatrix& factors);
FactorMatrix load_factors(const std::filesystem::path& path);

}  // namespace cdimf
