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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cdimf/consensus.hpp"
#include "cdimf/dataio.hpp"
#include "cdimf/eval.hpp"
#include "cdimf/solver.hpp"

namespace cdimf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

struct DomainEntry {
  std::string name;
  fs::path train;
  std::optional<fs::path> valid;
  std::optional<fs::path> test;
  SolverConfig solver;
};

struct RunConfig {
  Scenario scenario = Scenario::kWarm;
  std::vector<DomainEntry> domains;
  ColumnSchema columns;
  ConsensusConfig consensus;
  EvalConfig eval;
  fs::path output_dir = "cdimf-out";
  std::uint64_t seed = 0;
  int threads = 0;
  /// Effective configuration after overrides, with absolute paths.
  json effective;

  const DomainEntry& domain(std::string_view name) const;
  std::size_t domain_index(std::string_view name) const;
};

/// Sets a dotted key ("consensus.rho", "domains.0.train") from "key=value".
/// The value is parsed as JSON when possible and taken as a string otherwise.
void apply_override(json& j, std::string_view assignment);

/// Sets a dotted key to \p value, creating objects along the way.
void set_path(json& j, const std::string& key, json value);

/// Relative paths in \p j resolve against \p base_dir.
RunConfig parse_run_config(json j, const fs::path& base_dir);

/// Reads a JSON config; \p overrides are applied before validation and their
/// relative paths resolve against the working directory.
RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides);

std::string sha256_hex(std::string_view bytes);
std::string config_hash(const RunConfig& config);

json to_json(const SolverConfig& c);
json to_json(const EvalReport& r);

}  // namespace cdimf::cli
