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
#include "cdimf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <unordered_set>

#ifdef CDIMF_HAVE_OPENMP
#include <omp.h>
#endif

#include "cdimf/error.hpp"

namespace cdimf {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct CaseResult {
  enum class Status { kOk, kUnknownUser, kUnknownItem } status = Status::kOk;
  Index rank = 0;
  std::vector<Index> top;
};

// Candidate a ranks before b: higher score first; on ties negatives precede
// the target (position 0) and otherwise keep their sampled order.
auto ranking_order(const std::vector<double>& scores) {
  return [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (a == 0 || b == 0) return b == 0;
    return a < b;
  };
}

std::vector<double> score_all(const Eigen::Ref<const Vector>& user, const Matrix& items,
                              std::span<const Index> candidates) {
  std::vector<double> scores(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) scores[c] = items.row(candidates[c]).dot(user);
  return scores;
}

}  // namespace

void EvalConfig::validate() const {
  if (k < 1) throw ConfigError("eval: k must be >= 1");
  if (n_negatives < k) throw ConfigError("eval: n_negatives must be >= k");
}

std::uint64_t case_seed(std::uint64_t seed, std::string_view user_id, Index test_item) {
  return splitmix64(splitmix64(seed ^ fnv1a(user_id)) ^ static_cast<std::uint64_t>(test_item));
}

std::vector<Index> sample_negatives(std::span<const Index> train_items, Index test_item,
                                    Index catalog_size, const EvalConfig& config,
                                    std::string_view user_id) {
  auto excluded = [&](Index item) {
    return item == test_item || std::binary_search(train_items.begin(), train_items.end(), item);
  };
  Index n_excluded = (test_item >= 0 && test_item < catalog_size) ? 1 : 0;
  for (const Index item : train_items) {
    if (item != test_item && item >= 0 && item < catalog_size) ++n_excluded;
  }
  const Index eligible = catalog_size - n_excluded;
  const Index want = config.n_negatives;
  if (eligible < want) {
    throw DataError("catalog too small: " + std::to_string(eligible) + " eligible items for " +
                    std::to_string(want) + " negatives");
  }
  std::mt19937_64 rng(case_seed(config.seed, user_id, test_item));
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(want));
  if (2 * want <= eligible) {
    std::uniform_int_distribution<Index> draw(0, catalog_size - 1);
    std::unordered_set<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(2 * want));
    while (static_cast<Index>(out.size()) < want) {
      const Index item = draw(rng);
      if (excluded(item) || !chosen.insert(item).second) continue;
      out.push_back(item);
    }
    return out;
  }
  std::vector<Index> pool;
  pool.reserve(static_cast<std::size_t>(eligible));
  for (Index item = 0; item < catalog_size; ++item) {
    if (!excluded(item)) pool.push_back(item);
  }
  for (Index k = 0; k < want; ++k) {
    std::uniform_int_distribution<Index> draw(k, eligible - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(draw(rng))]);
    out.push_back(pool[static_cast<std::size_t>(k)]);
  }
  return out;
}

Index rank_of_target(const Eigen::Ref<const Vector>& user, const Matrix& item_factors,
                     std::span<const Index> candidates) {
  if (candidates.empty()) throw ConfigError("rank_of_target: no candidates");
  const double target = item_factors.row(candidates[0]).dot(user);
  Index rank = 1;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (item_factors.row(candidates[c]).dot(user) >= target) ++rank;
  }
  return rank;
}

std::vector<Index> top_k(const Eigen::Ref<const Vector>& user, const Matrix& item_factors,
                         std::span<const Index> candidates, Index k) {
  const auto scores = score_all(user, item_factors, candidates);
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    ranking_order(scores));
  std::vector<Index> out;
  out.reserve(take);
  for (std::size_t c = 0; c < take; ++c) out.push_back(candidates[order[c]]);
  return out;
}

std::pair<double, double> metrics_from_rank(Index rank, Index k) {
  if (rank < 1) throw ConfigError("metrics_from_rank: rank must be >= 1");
  if (rank > k) return {0.0, 0.0};
  return {1.0, 1.0 / std::log2(static_cast<double>(rank) + 1.0)};
}

EvalReport evaluate_cold(const FactorModel& source_model, const DomainDataset& source_train,
                         const FactorModel& target_model, const DomainDataset& target_train,
                         const InteractionLog& test, const EvalConfig& config, int threads) {
  config.validate();
  if (test.empty()) throw DataError("evaluation: empty test set");
  const Matrix& items = target_model.items.values;
  if (items.rows() != target_train.n_items()) {
    throw ConfigError("evaluation: item factors do not match the target catalog");
  }
  if (source_model.users.rows() != source_train.n_users()) {
    throw ConfigError("evaluation: user factors do not match the source vocabulary");
  }
  const auto n = static_cast<Index>(test.records.size());
  std::vector<CaseResult> results(static_cast<std::size_t>(n));
  std::exception_ptr failure;
  std::mutex failure_mutex;
#ifdef CDIMF_HAVE_OPENMP
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(nt)
#else
  (void)threads;
#endif
  for (Index c = 0; c < n; ++c) {
    try {
      const auto& record = test.records[static_cast<std::size_t>(c)];
      auto& result = results[static_cast<std::size_t>(c)];
      const auto user_row = source_train.users.find(record.user);
      if (!user_row) {
        result.status = CaseResult::Status::kUnknownUser;
        continue;
      }
      const auto item = target_train.items.find(record.item);
      if (!item) {
        result.status = CaseResult::Status::kUnknownItem;
        continue;
      }
      std::span<const Index> seen;
      if (const auto target_row = target_train.users.find(record.user)) {
        seen = target_train.items_of(*target_row);
      }
      std::vector<Index> candidates{*item};
      const auto negatives =
          sample_negatives(seen, *item, target_train.n_items(), config, record.user);
      candidates.insert(candidates.end(), negatives.begin(), negatives.end());
      const Vector user = source_model.users.values.row(*user_row).transpose();
      result.rank = rank_of_target(user, items, candidates);
      result.top = top_k(user, items, candidates, config.k);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.config = config;
  std::vector<char> covered(static_cast<std::size_t>(target_train.n_items()), 0);
  double hr = 0.0;
  double ndcg = 0.0;
  for (const auto& result : results) {
    if (result.status == CaseResult::Status::kUnknownUser) {
      ++report.skipped_users;
      continue;
    }
    if (result.status == CaseResult::Status::kUnknownItem) {
      ++report.skipped_items;
      continue;
    }
    const auto [h, g] = metrics_from_rank(result.rank, config.k);
    hr += h;
    ndcg += g;
    ++report.n_cases;
    for (const Index item : result.top) covered[static_cast<std::size_t>(item)] = 1;
  }
  if (report.n_cases == 0) throw DataError("evaluation: no test case matched the model");
  report.hr = hr / static_cast<double>(report.n_cases);
  report.ndcg = ndcg / static_cast<double>(report.n_cases);
  report.coverage = static_cast<double>(std::count(covered.begin(), covered.end(), 1)) /
                    static_cast<double>(target_train.n_items());
  return report;
}

EvalReport evaluate_warm(const FactorModel& model, const DomainDataset& train,
                         const InteractionLog& test, const EvalConfig& config, int threads) {
  return evaluate_cold(model, train, model, train, test, config, threads);
}

}  // namespace cdimf
