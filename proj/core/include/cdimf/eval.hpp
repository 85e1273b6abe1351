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
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cdimf/dataio.hpp"
#include "cdimf/solver.hpp"
#include "cdimf/types.hpp"

namespace cdimf {

struct EvalConfig {
  Index k = 10;
  Index n_negatives = 999;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Metrics in [0, 1]; the CLI prints them as percentages.
struct EvalReport {
  double hr = 0.0;
  double ndcg = 0.0;
  double coverage = 0.0;
  Index n_cases = 0;
  Index skipped_users = 0;
  Index skipped_items = 0;
  EvalConfig config;
};

/// Stable per-case seed derived from the run seed, the user id and the test
/// item index.
std::uint64_t case_seed(std::uint64_t seed, std::string_view user_id, Index test_item);

/// Uniform sample without replacement of config.n_negatives items from
/// [0, catalog_size) minus \p train_items (sorted) and \p test_item, in draw
/// order. Throws DataError if fewer eligible items exist.
std::vector<Index> sample_negatives(std::span<const Index> train_items, Index test_item,
                                    Index catalog_size, const EvalConfig& config,
                                    std::string_view user_id);

/// 1 + the number of negatives scoring at least as high as the target
/// (ties rank the target last). \p candidates holds the target first.
Index rank_of_target(const Eigen::Ref<const Vector>& user, const Matrix& item_factors,
                     std::span<const Index> candidates);

/// The first k candidates in ranked order, under the same tie rule; equal
/// negatives keep their sampled order.
std::vector<Index> top_k(const Eigen::Ref<const Vector>& user, const Matrix& item_factors,
                         std::span<const Index> candidates, Index k);

/// (hit, 1 / log2(rank + 1)) when rank <= k, else (0, 0).
std::pair<double, double> metrics_from_rank(Index rank, Index k);

/// Leave-one-out evaluation inside one domain. \p train supplies the id
/// vocabularies and each user's training items, which are never sampled as
/// negatives.
EvalReport evaluate_warm(const FactorModel& model, const DomainDataset& train,
                         const InteractionLog& test, const EvalConfig& config,
                         int threads = 0);

/// Cold-start evaluation: each test user's vector comes from the source
/// domain and is scored against the target domain's items.
EvalReport evaluate_cold(const FactorModel& source_model, const DomainDataset& source_train,
                         const FactorModel& target_model, const DomainDataset& target_train,
                         const InteractionLog& test, const EvalConfig& config, int threads = 0);

}  // namespace cdimf
