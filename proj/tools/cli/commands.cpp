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
#include "cli/commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "cdimf/error.hpp"
#include "cdimf/federation.hpp"

#ifndef CDIMF_VERSION_STRING
#define CDIMF_VERSION_STRING "unknown"
#endif

namespace cdimf::cli {
namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

json stats_json(const DomainDataset& d) {
  const auto s = stats(d);
  return {{"users", s.n_users}, {"items", s.n_items}, {"ratings", s.n_ratings}, {"shared", s.n_shared}};
}

void print_table(std::ostream& out, const std::vector<std::pair<std::string, DatasetStats>>& rows) {
  out << std::left << std::setw(16) << "domain" << std::right << std::setw(10) << "users" << std::setw(10)
      << "items" << std::setw(12) << "ratings" << std::setw(10) << "shared" << '\n';
  for (const auto& [name, s] : rows) {
    out << std::left << std::setw(16) << name << std::right << std::setw(10) << s.n_users << std::setw(10)
        << s.n_items << std::setw(12) << s.n_ratings << std::setw(10) << s.n_shared << '\n';
  }
}

void print_reports(std::ostream& out, const std::vector<EvalCase>& cases) {
  for (const auto& c : cases) {
    out << (c.source == c.target ? c.target : c.source + " -> " + c.target) << ": HR@" << c.report.config.k
        << " " << std::fixed << std::setprecision(4) << c.report.hr << "  NDCG@" << c.report.config.k << " "
        << c.report.ndcg << "  coverage " << c.report.coverage << std::defaultfloat << "  (" << c.report.n_cases
        << " cases)\n";
  }
}

json cases_json(const std::vector<EvalCase>& cases) {
  json arr = json::array();
  for (const auto& c : cases) {
    json r = to_json(c.report);
    r["source"] = c.source;
    r["target"] = c.target;
    arr.push_back(std::move(r));
  }
  return arr;
}

void write_diagnostics(const fs::path& path, const std::vector<RoundDiagnostics>& rounds,
                       std::span<const LoadedDomain> domains) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "round,epoch,domain,primal_residual,objective,diverged,elapsed_ms\n";
  for (const auto& r : rounds) {
    for (std::size_t k = 0; k < r.primal_residuals.size(); ++k) {
      out << r.round << ',' << r.epoch << ',' << csv_field(domains[k].name) << ',' << fmt(r.primal_residuals[k])
          << ',' << fmt(r.objectives[k]) << ',' << (r.diverged ? 1 : 0) << ',' << fmt(r.elapsed_ms) << '\n';
    }
  }
}

Split default_split(const std::vector<LoadedDomain>& domains) {
  for (const auto& d : domains) {
    if (d.valid.empty()) return Split::kTest;
  }
  return Split::kValid;
}

std::string_view to_string(Split s) { return s == Split::kValid ? "valid" : "test"; }

std::string json_scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

int exit_code_for(const Error& error) {
  switch (error.category()) {
    case Error::Category::kConfig: return kExitConfig;
    case Error::Category::kData: return kExitData;
    case Error::Category::kDivergence:
    case Error::Category::kNumeric: return kExitDivergence;
    case Error::Category::kProtocol: return kExitProtocol;
  }
  return kExitOther;
}

void write_manifest(const fs::path& dir, const RunConfig& config, const std::string& command,
                    const std::vector<std::string>& files, const std::string& name) {
  json m;
  m["tool"] = "cdimf";
  m["version"] = CDIMF_VERSION_STRING;
  m["command"] = command;
  m["config_hash"] = config_hash(config);
  m["config"] = config.effective;
  m["versions"] = {{"cdimf", CDIMF_VERSION_STRING},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                 "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  m["files"] = files;
  write_json(dir / name, m);
}

void cmd_prepare(const PrepareOptions& options, std::ostream& out) {
  if (options.out_dir.empty()) throw ConfigError("prepare needs an output directory");
  std::vector<InteractionLog> logs;
  if (options.synthetic) {
    if (!options.inputs.empty()) throw ConfigError("use either --input or --synthetic, not both");
    logs = make_synthetic_logs(*options.synthetic);
  } else {
    if (options.inputs.empty()) throw ConfigError("prepare needs at least one --input name=path");
    for (const auto& [name, path] : options.inputs) logs.push_back(read_interactions(path, options.columns, name));
  }
  const Index min_user = options.min_user.value_or(options.synthetic ? 0 : 5);
  const Index min_item = options.min_item.value_or(options.synthetic ? 0 : 10);

  json stats;
  stats["scenario"] = std::string(to_string(options.scenario));
  stats["seed"] = options.seed;
  stats["filter"] = {{"min_user", min_user}, {"min_item", min_item}};
  for (auto& log : logs) {
    json entry;
    entry["raw_ratings"] = log.size();
    entry["raw_users"] = distinct_users(log).size();
    if (min_user > 0 || min_item > 0) log = filter_core(log, min_user, min_item);
    const auto v = check_core(log, min_user, min_item);
    entry["filtered_ratings"] = log.size();
    entry["core_violations"] = {{"users", v.users_below}, {"items", v.items_below}};
    stats["domains"][log.domain_name] = entry;
  }

  std::vector<SplitBundle> bundles;
  if (options.scenario == Scenario::kWarm) {
    if (logs.size() < 2) throw ConfigError("the warm scenario needs at least two domains");
    bundles = make_warm_splits(logs, options.seed, options.validation);
  } else {
    if (logs.size() != 2) throw ConfigError("the cold scenario needs exactly two domains");
    auto [a, b] = split_cold_start(logs[0], logs[1], options.cold_fraction, options.seed);
    const auto ta = distinct_users(a.test);
    const auto tb = distinct_users(b.test);
    const auto overlap = intersect_sorted(ta, tb).size();
    if (overlap != 0) throw DataError("cold split produced overlapping test users");
    stats["cold"] = {{"test_users", {{logs[0].domain_name, ta.size()}, {logs[1].domain_name, tb.size()}}},
                     {"test_user_overlap", overlap},
                     {"fraction", options.cold_fraction}};
    bundles.push_back(std::move(a));
    bundles.push_back(std::move(b));
  }

  fs::create_directories(options.out_dir);
  json config;
  config["scenario"] = std::string(to_string(options.scenario));
  config["seed"] = options.seed;
  config["output_dir"] = "runs/default";
  std::vector<std::pair<std::string, DatasetStats>> table;
  for (const auto& b : bundles) {
    const auto& name = b.train.name;
    const auto dir = options.out_dir / name;
    fs::create_directories(dir);
    write_interactions(dir / "train.tsv", to_log(b.train));
    write_interactions(dir / "test.tsv", b.test);
    json domain{{"name", name}, {"train", name + "/train.tsv"}, {"test", name + "/test.tsv"}};
    if (!b.validation.empty()) {
      write_interactions(dir / "valid.tsv", b.validation);
      domain["valid"] = name + "/valid.tsv";
    }
    config["domains"].push_back(domain);
    auto& entry = stats["domains"][name];
    entry["train"] = stats_json(b.train);
    entry["valid_ratings"] = b.validation.size();
    entry["test_ratings"] = b.test.size();
    entry["skipped_users"] = b.skipped_users;
    table.emplace_back(name, cdimf::stats(b.train));
  }
  // starting point for real data; tune with `sweep`
  SolverConfig solver;
  solver.d = 32;
  solver.alpha = 0.01;
  solver.lambda = 0.1;
  config["solver"] = to_json(solver);
  Index smallest_catalog = std::numeric_limits<Index>::max();
  for (const auto& b : bundles) smallest_catalog = std::min(smallest_catalog, b.train.n_items());
  config["consensus"] = {{"rho", 1.0}, {"prox", "identity"}, {"lambda_g", 0.0}, {"aggregation_period", 1},
                         {"outer_rounds", 10}};
  config["eval"] = {{"k", 10}, {"n_negatives", smallest_catalog > 1200 ? 999 : 99}, {"seed", options.seed}};
  write_json(options.out_dir / "stats.json", stats);
  write_json(options.out_dir / "config.json", config);
  print_table(out, table);
  if (stats.contains("cold")) {
    out << "cold-start test users: " << stats["cold"]["test_users"].dump() << ", overlap "
        << stats["cold"]["test_user_overlap"] << '\n';
  }
}

void cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out) {
  const auto domains = load_domains(config);
  RunOptions run;
  run.mode = options.mode;
  const auto outcome = run_training(config, domains, run);
  const auto dir = config.output_dir;
  fs::create_directories(dir);
  std::vector<std::string> files;

  json summary;
  summary["mode"] = std::string(to_string(options.mode));
  summary["scenario"] = std::string(to_string(config.scenario));
  summary["epochs"] = config.consensus.total_epochs();
  summary["diverged"] = outcome.diverged;
  for (const auto& d : domains) summary["domains"][d.name] = stats_json(d.train);
  if (options.mode == Mode::kCdimf) {
    write_diagnostics(dir / "diagnostics.csv", outcome.rounds, domains);
    files.push_back("diagnostics.csv");
    write_id_list(dir / "alignment.txt", outcome.alignment);
    files.push_back("alignment.txt");
    summary["rounds"] = outcome.rounds.size();
    summary["shared_users"] = outcome.alignment.size();
    summary["alignment_digest"] = to_hex(alignment_digest(outcome.alignment));
    if (!outcome.rounds.empty()) summary["final_mean_residual"] = outcome.rounds.back().mean_residual();
  }
  if (!outcome.diverged) {
    for (const auto& m : outcome.models) {
      write_model(dir, m);
      for (const char* ext : {".users.cdmf", ".items.cdmf", ".users.txt", ".items.txt"}) files.push_back(m.name + ext);
    }
  }
  write_json(dir / "summary.json", summary);
  files.push_back("summary.json");
  write_manifest(dir, config, options.command_line, files);
  if (outcome.diverged) {
    throw DivergenceError("training diverged; diagnostics are in " + dir.string());
  }
  out << "trained " << to_string(options.mode) << " for " << config.consensus.total_epochs() << " epochs; models in "
      << dir.string() << '\n';
  if (!outcome.rounds.empty()) {
    out << "final mean primal residual " << outcome.rounds.back().mean_residual() << '\n';
  }
}

void cmd_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& out) {
  const auto domains = load_domains(config);
  const auto dir = options.model_dir.value_or(config.output_dir);
  std::vector<DomainModel> models;
  for (const auto& d : domains) models.push_back(read_model(dir, d.name));
  std::optional<std::pair<std::string, std::string>> pair;
  if (options.source || options.target) {
    if (!options.target) throw ConfigError("--source needs --target");
    const std::string target = *options.target;
    std::string source = options.source.value_or(target);
    if (!options.source && config.scenario == Scenario::kCold) {
      if (domains.size() != 2) throw ConfigError("cold evaluation needs --source with more than two domains");
      source = domains[0].name == target ? domains[1].name : domains[0].name;
    }
    config.domain(source);
    config.domain(target);
    pair = {source, target};
  }
  const auto cases = evaluate_models(config.scenario, models, domains, options.split, config.eval, config.threads, pair);
  json report;
  report["scenario"] = std::string(to_string(config.scenario));
  report["split"] = std::string(to_string(options.split));
  report["model_dir"] = dir.string();
  report["results"] = cases_json(cases);
  const auto path = options.report.value_or(dir / "report.json");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json(path, report);
  print_reports(out, cases);
}

void cmd_sweep(const RunConfig& config, const SweepOptions& options, std::ostream& out) {
  std::ifstream in(options.grid);
  if (!in) throw ConfigError("cannot open grid " + options.grid.string());
  const json grid = json::parse(in, nullptr, false, true);
  if (grid.is_discarded() || !grid.is_object() || grid.empty()) {
    throw ConfigError("grid must be a JSON object mapping config keys to value lists");
  }
  std::vector<std::string> keys;
  std::vector<std::vector<json>> values;
  std::size_t n_points = 1;
  for (const auto& [key, list] : grid.items()) {
    if (!list.is_array() || list.empty()) throw ConfigError("grid entry '" + key + "' must be a non-empty list");
    keys.push_back(key);
    values.emplace_back(list.begin(), list.end());
    n_points *= list.size();
  }
  bool reload = false;
  for (const auto& k : keys) reload |= k.starts_with("domains") || k.starts_with("columns");

  const auto base_domains = load_domains(config);
  const Split split = options.split.value_or(default_split(base_domains));

  struct PointResult {
    std::vector<std::string> rows;
  };
  auto run_point = [&](std::size_t index) {
    PointResult result;
    std::vector<json> chosen(keys.size());
    std::size_t rest = index;
    for (std::size_t k = keys.size(); k-- > 0;) {
      chosen[k] = values[k][rest % values[k].size()];
      rest /= values[k].size();
    }
    const std::uint64_t seed = config.seed + index;
    std::string prefix = std::to_string(index) + "," + std::to_string(seed);
    for (const auto& v : chosen) prefix += "," + csv_field(json_scalar(v));
    prefix += "," + std::string(to_string(options.mode)) + "," + std::string(to_string(split));
    auto status_row = [&](const std::string& status, const std::string& message) {
      result.rows.push_back(prefix + ",,,,,,,,,,," + status + "," + csv_field(message));
    };
    try {
      json j = config.effective;
      for (std::size_t k = 0; k < keys.size(); ++k) set_path(j, keys[k], chosen[k]);
      j["seed"] = seed;
      if (options.parallel > 1 && !j.contains("threads")) j["threads"] = 1;
      const auto point = parse_run_config(std::move(j), fs::current_path());
      std::vector<LoadedDomain> domains = reload ? load_domains(point) : base_domains;
      for (std::size_t k = 0; k < domains.size(); ++k) domains[k].solver = point.domains[k].solver;
      RunOptions run{options.mode, split, options.eval_every};
      const auto outcome = run_training(point, domains, run);
      const int ap = point.consensus.aggregation_period;
      for (const auto& e : outcome.epochs) {
        const RoundDiagnostics* diag = nullptr;
        for (const auto& r : outcome.rounds) {
          if (r.epoch == e.epoch) diag = &r;
        }
        for (const auto& c : e.cases) {
          std::string residual;
          if (diag != nullptr) {
            for (std::size_t k = 0; k < domains.size(); ++k) {
              if (domains[k].name == c.target) residual = fmt(diag->primal_residuals[k]);
            }
          }
          const std::string round = options.mode == Mode::kCdimf ? std::to_string((e.epoch + ap - 1) / ap) : "";
          result.rows.push_back(prefix + "," + std::to_string(e.epoch) + "," + round + "," +
                                (e.exchanged ? "1" : "0") + "," + csv_field(c.source) + "," + csv_field(c.target) +
                                "," + fmt(c.report.hr) + "," + fmt(c.report.ndcg) + "," + fmt(c.report.coverage) +
                                "," + std::to_string(c.report.n_cases) + "," + residual + ",ok,");
        }
      }
      if (outcome.diverged) status_row("diverged", "non-finite factors");
    } catch (const Error& e) {
      status_row("error", e.what());
    } catch (const std::exception& e) {
      status_row("error", e.what());
    }
    return result;
  };

  std::vector<PointResult> results(n_points);
  const int parallel = std::max(1, options.parallel);
  for (std::size_t start = 0; start < n_points; start += static_cast<std::size_t>(parallel)) {
    std::vector<std::future<PointResult>> batch;
    const auto end = std::min(n_points, start + static_cast<std::size_t>(parallel));
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(parallel > 1 ? std::launch::async : std::launch::deferred, run_point, i));
    }
    for (std::size_t i = start; i < end; ++i) results[i] = batch[i - start].get();
    out << "sweep: " << end << "/" << n_points << " points done\n";
  }

  const auto dir = config.output_dir;
  fs::create_directories(dir);
  const auto path = options.csv.value_or(dir / "sweep.csv");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream csv(path);
  if (!csv) throw DataError("cannot write " + path.string());
  csv << "point,seed";
  for (const auto& k : keys) csv << ',' << csv_field(k);
  csv << ",mode,split,epoch,round,exchanged,source,target,hr,ndcg,coverage,n_cases,primal_residual,status,message\n";
  std::size_t failures = 0;
  for (const auto& r : results) {
    for (const auto& row : r.rows) {
      csv << row << '\n';
      failures += row.find(",error,") != std::string::npos || row.find(",diverged,") != std::string::npos;
    }
  }
  write_manifest(dir, config, options.command_line, {path.filename().string()});
  out << "wrote " << path.string() << " (" << n_points << " points, " << failures << " failed)\n";
}

void cmd_aggregator(const RunConfig& config, const AggregatorCommandOptions& options, std::ostream& out) {
  AggregatorOptions ao;
  ao.listen_address = options.listen;
  ao.timeout = options.timeout;
  Aggregator aggregator(config.consensus, ao);
  const auto host = options.listen.substr(0, options.listen.rfind(':'));
  out << "aggregator listening on " << host << ":" << aggregator.port() << std::endl;
  const auto result = aggregator.run();
  fs::create_directories(config.output_dir);
  json summary{{"rounds_completed", result.rounds_completed},
               {"shared_users", result.z.rows()},
               {"alignment_digest", to_hex(result.digest)}};
  write_json(config.output_dir / "aggregator.json", summary);
  write_manifest(config.output_dir, config, options.command_line, {"aggregator.json"});
  out << "session finished after " << result.rounds_completed << " rounds\n";
}

void cmd_worker(const RunConfig& config, const WorkerCommandOptions& options, std::ostream& out) {
  const auto index = config.domain_index(options.domain);
  const auto shared = options.shared_users ? read_id_list(*options.shared_users) : shared_users_of(config);
  auto sorted = shared;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto domain = load_domain(config, index, sorted);

  WorkerOptions wo;
  wo.aggregator_address = resolve_aggregator_address(options.aggregator);
  wo.domain_id = static_cast<std::uint32_t>(index);
  wo.timeout = options.timeout;
  wo.checkpoint_dir = options.checkpoint_dir.value_or(config.output_dir / ("checkpoint-" + domain.name));
  wo.threads = config.threads;
  const auto result = run_worker(wo, domain.train, domain.solver, config.consensus,
                                 domain_seed(config.seed, static_cast<int>(index)));
  const auto dir = config.output_dir;
  write_model(dir, {domain.name, result.model, domain.train.users, domain.train.items});
  json summary{{"domain", domain.name},
               {"rounds_completed", result.rounds_completed},
               {"shared_users", domain.train.shared_rows.size()}};
  write_json(dir / (domain.name + ".worker.json"), summary);
  std::vector<std::string> files{domain.name + ".worker.json"};
  for (const char* ext : {".users.cdmf", ".items.cdmf", ".users.txt", ".items.txt"}) files.push_back(domain.name + ext);
  write_manifest(dir, config, options.command_line, files, domain.name + ".manifest.json");
  out << "worker " << domain.name << " finished " << result.rounds_completed << " rounds\n";
}

}  // namespace cdimf::cli
