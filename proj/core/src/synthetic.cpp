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
#include "cdimf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace cdimf {
namespace {

std::string numbered(const std::string& prefix, Index k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(k));
  return prefix + buf;
}

Matrix gaussian(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
  return m;
}

}  // namespace

std::vector<InteractionLog> make_synthetic_logs(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const double scale = std::pow(static_cast<double>(spec.d), -0.25);
  const Matrix shared_users = gaussian(spec.n_shared_users, spec.d, scale, rng);
  std::uniform_int_distribution<Index> count(spec.min_interactions, spec.max_interactions);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<InteractionLog> logs;
  for (std::size_t dom = 0; dom < spec.domain_names.size(); ++dom) {
    const std::string& name = spec.domain_names[dom];
    if (spec.identical_domains && dom > 0) {
      InteractionLog copy = logs.front();
      copy.domain_name = name;
      for (auto& r : copy.records) r.item = name + r.item.substr(spec.domain_names[0].size());
      logs.push_back(std::move(copy));
      continue;
    }
    const Matrix items = gaussian(spec.n_items, spec.d, scale, rng);
    Vector bias(spec.n_items);
    std::normal_distribution<double> pop(0.0, spec.popularity);
    for (Index i = 0; i < spec.n_items; ++i) bias(i) = spec.popularity > 0.0 ? pop(rng) : 0.0;
    Matrix users = shared_users;
    if (spec.n_private_users > 0) {
      const Matrix extra = gaussian(spec.n_private_users, spec.d, scale, rng);
      users.conservativeResize(spec.n_shared_users + spec.n_private_users, Eigen::NoChange);
      users.bottomRows(spec.n_private_users) = extra;
    }

    std::vector<Interaction> records;
    std::vector<std::pair<double, Index>> keys(static_cast<std::size_t>(spec.n_items));
    for (Index u = 0; u < users.rows(); ++u) {
      const std::string user_id = u < spec.n_shared_users
                                      ? numbered("user_", u)
                                      : numbered(name + "_private_", u - spec.n_shared_users);
      // Gumbel top-k: a sample without replacement from softmax(logits).
      for (Index i = 0; i < spec.n_items; ++i) {
        const double logit = spec.signal * users.row(u).dot(items.row(i)) + bias(i);
        const double gumbel = -std::log(-std::log(std::max(unit(rng), 1e-300)));
        keys[static_cast<std::size_t>(i)] = {logit + gumbel, i};
      }
      const auto n = std::min(count(rng), spec.n_items);
      std::partial_sort(keys.begin(), keys.begin() + n, keys.end(),
                        [](const auto& a, const auto& b) { return a.first > b.first; });
      for (Index k = 0; k < n; ++k) {
        records.push_back({user_id, numbered(name + "_item_", keys[static_cast<std::size_t>(k)].second),
                           std::nullopt});
      }
    }
    logs.push_back(InteractionLog::from_records(name, std::move(records)));
  }
  return logs;
}

std::vector<SplitBundle> make_warm_splits(const std::vector<InteractionLog>& logs,
                                          std::uint64_t seed, bool hold_out_validation) {
  std::vector<std::string> shared;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const auto users = distinct_users(logs[k]);
    shared = k == 0 ? users : intersect_sorted(shared, users);
  }
  std::vector<SplitBundle> out;
  for (const auto& log : logs) {
    const auto restricted = restrict_to_users(log, shared);
    out.push_back(split_leave_one_out(build_dataset(restricted, shared), seed, hold_out_validation));
  }
  return out;
}

}  // namespace cdimf
