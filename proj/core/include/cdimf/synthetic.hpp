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
#include <string>
#include <vector>

#include "cdimf/dataio.hpp"
#include "cdimf/types.hpp"

namespace cdimf {

/// Planted low-rank multi-domain implicit data: every domain draws its
/// interactions from the same ground-truth user factors.
struct SyntheticSpec {
  Index n_shared_users = 500;
  /// Extra users per domain that appear in that domain only.
  Index n_private_users = 0;
  Index n_items = 200;
  Index d = 8;
  Index min_interactions = 5;
  Index max_interactions = 15;
  /// Scale of the preference logits; larger means more predictable choices.
  double signal = 3.0;
  /// Standard deviation of a per-item logit offset (popularity skew).
  double popularity = 1.0;
  /// Reuse domain 0's items and interactions in every domain.
  bool identical_domains = false;
  std::vector<std::string> domain_names{"a", "b"};
  std::uint64_t seed = 1;
};

std::vector<InteractionLog> make_synthetic_logs(const SyntheticSpec& spec);

/// Per-domain warm splits over the users shared by all logs.
std::vector<SplitBundle> make_warm_splits(const std::vector<InteractionLog>& logs,
                                          std::uint64_t seed, bool hold_out_validation);

}  // namespace cdimf
