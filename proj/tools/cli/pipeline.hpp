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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdimf/consensus.hpp"
#include "cdimf/dataio.hpp"
#include "cdimf/eval.hpp"
#include "cdimf/solver.hpp"
#include "cli/config.hpp"

namespace cdimf::cli {

enum class Mode { kAlsSeparate, kAlsJoined, kCdimf };

Mode parse_mode(std::string_view text);
std::string_view to_string(Mode mode);

enum class Split { kValid, kTest };

struct LoadedDomain {
  std::string name;
  DomainDataset train;
  InteractionLog valid;
  InteractionLog test;
  SolverConfig solver;
};

/// Sorted user ids present in every domain's training file.
std::vector<std::string> shared_users_of(const RunConfig& config);

std::vector<std::string> read_id_list(const fs::path& path);
void write_id_list(const fs::path& path, std::span<const std::string> ids);

/// Loads the domain's files. Items that occur only in the held-out files are
/// added to the catalog as empty columns so every held-out item can be ranked.
LoadedDomain load_domain(const RunConfig& config, std::size_t index,
                         std::span<const std::string> shared_users);

std::vector<LoadedDomain> load_domains(const RunConfig& config);

/// A trained model for one domain together with the row vocabularies.
struct DomainModel {
  std::string name;
  FactorModel model;
  Vocabulary users;
  Vocabulary items;
};

void write_model(const fs::path& dir, const DomainModel& m);
DomainModel read_model(const fs::path& dir, const std::string& name);

/// Per-domain models exported from a joined model: all joined users, the
/// domain's slice of the item columns.
std::vector<DomainModel> split_joined(const FactorModel& joined, const DomainDataset& joined_data,
                                      const std::vector<Index>& offsets,
                                      std::span<const LoadedDomain> domains);

struct EvalCase {
  std::string source;
  std::string target;
  EvalReport report;
};

/// Warm: every domain against its own held-out split. Cold: each target
/// against the other domain's user factors (two domains), or the explicit
/// (source, target) pair.
std::vector<EvalCase> evaluate_models(Scenario scenario, std::span<const DomainModel> models,
                                      std::span<const LoadedDomain> domains, Split split,
                                      const EvalConfig& eval, int threads,
                                      std::optional<std::pair<std::string, std::string>> pair = {});

struct EpochEval {
  int epoch = 0;
  bool exchanged = false;
  std::vector<EvalCase> cases;
};

struct RunOutcome {
  std::vector<DomainModel> models;
  std::vector<RoundDiagnostics> rounds;
  std::vector<std::string> alignment;
  bool diverged = false;
  /// Filled only when an epoch callback split is requested.
  std::vector<EpochEval> epochs;
};

struct RunOptions {
  Mode mode = Mode::kCdimf;
  std::optional<Split> eval_each_epoch;
  int eval_every = 1;
};

RunOutcome run_training(const RunConfig& config, std::span<const LoadedDomain> domains,
                        const RunOptions& options);

}  // namespace cdimf::cli
