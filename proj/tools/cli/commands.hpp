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

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdimf/error.hpp"
#include "cdimf/synthetic.hpp"
#include "cli/config.hpp"
#include "cli/pipeline.hpp"

namespace cdimf::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitProtocol = 5,
};

int exit_code_for(const Error& error);

struct PrepareOptions {
  std::vector<std::pair<std::string, fs::path>> inputs;
  std::optional<SyntheticSpec> synthetic;
  ColumnSchema columns;
  Scenario scenario = Scenario::kWarm;
  fs::path out_dir;
  std::uint64_t seed = 0;
  /// Core-filter thresholds; unset means 5 / 10 for file inputs and no
  /// filtering for synthetic data.
  std::optional<Index> min_user;
  std::optional<Index> min_item;
  double cold_fraction = 0.1;
  bool validation = true;
};

void cmd_prepare(const PrepareOptions& options, std::ostream& out);

struct TrainOptions {
  Mode mode = Mode::kCdimf;
  std::string command_line;
};

void cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out);

struct EvaluateOptions {
  std::optional<fs::path> model_dir;
  Split split = Split::kTest;
  std::optional<std::string> source;
  std::optional<std::string> target;
  std::optional<fs::path> report;
  std::string command_line;
};

void cmd_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& out);

struct SweepOptions {
  fs::path grid;
  Mode mode = Mode::kCdimf;
  /// Unset: validation when every domain has one, test otherwise.
  std::optional<Split> split;
  int parallel = 1;
  int eval_every = 1;
  std::optional<fs::path> csv;
  std::string command_line;
};

void cmd_sweep(const RunConfig& config, const SweepOptions& options, std::ostream& out);

struct AggregatorCommandOptions {
  std::string listen = "0.0.0.0:7070";
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  std::string command_line;
};

void cmd_aggregator(const RunConfig& config, const AggregatorCommandOptions& options,
                    std::ostream& out);

struct WorkerCommandOptions {
  std::string domain;
  std::string aggregator;
  std::optional<fs::path> shared_users;
  std::optional<fs::path> checkpoint_dir;
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  std::string command_line;
};

void cmd_worker(const RunConfig& config, const WorkerCommandOptions& options, std::ostream& out);

/// Writes <dir>/<name> with the config hash, versions and outputs.
void write_manifest(const fs::path& dir, const RunConfig& config, const std::string& command,
                    const std::vector<std::string>& files, const std::string& name = "manifest.json");

}  // namespace cdimf::cli
