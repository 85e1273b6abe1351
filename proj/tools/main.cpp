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
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdimf/error.hpp"
#include "cli/commands.hpp"

using namespace cdimf;
using namespace cdimf::cli;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<double> rho;
  std::optional<int> rounds;
  std::optional<int> period;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override a config key, e.g. --set consensus.rho=0.5 (repeatable)");
    app->add_option("--seed", seed, "Base seed");
    app->add_option("-o,--out", out, "Output directory");
    app->add_option("--threads", threads, "Worker threads for row updates (0 = all)");
    app->add_option("--rho", rho, "Sharing parameter");
    app->add_option("--rounds", rounds, "Outer rounds");
    app->add_option("--period", period, "Aggregation period (local epochs per exchange)");
  }

  RunConfig load() const {
    auto all = sets;
    if (seed) all.push_back("seed=" + std::to_string(*seed));
    if (out) all.push_back("output_dir=" + nlohmann::json(*out).dump());
    if (threads) all.push_back("threads=" + std::to_string(*threads));
    if (rho) all.push_back("consensus.rho=" + nlohmann::json(*rho).dump());
    if (rounds) all.push_back("consensus.outer_rounds=" + std::to_string(*rounds));
    if (period) all.push_back("consensus.aggregation_period=" + std::to_string(*period));
    return load_run_config(config, all);
  }
};

Split parse_split(const std::string& s) {
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("split must be 'valid' or 'test'");
}

}  // namespace

int main(int argc, char** argv) {
  std::string command_line;
  for (int k = 0; k < argc; ++k) command_line += (k ? " " : "") + std::string(argv[k]);

  CLI::App app{"cdimf: cross-domain implicit matrix factorization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("cdimf ") + CDIMF_VERSION_STRING);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Filter raw logs and write train/valid/test splits");
  PrepareOptions popt;
  std::vector<std::string> inputs;
  std::string scenario = "warm";
  std::string out_dir;
  bool synthetic = false;
  SyntheticSpec spec;
  std::string delimiter = "auto";
  std::string timestamp_column;
  Index min_user = -1, min_item = -1;
  bool no_validation = false;
  prepare->add_option("-i,--input", inputs, "Raw interaction log as name=path (repeatable)");
  prepare->add_flag("--synthetic", synthetic, "Generate a synthetic domain pair instead of reading logs");
  prepare->add_option("--synthetic-users", spec.n_shared_users, "Synthetic shared users");
  prepare->add_option("--synthetic-private", spec.n_private_users, "Synthetic per-domain private users");
  prepare->add_option("--synthetic-items", spec.n_items, "Synthetic items per domain");
  prepare->add_option("--scenario", scenario, "warm or cold")->check(CLI::IsMember({"warm", "cold"}));
  prepare->add_option("-o,--out", out_dir, "Output directory")->required();
  prepare->add_option("--seed", popt.seed, "Split seed");
  prepare->add_option("--min-user", min_user, "Minimum interactions per user (default 5; 0 for synthetic)");
  prepare->add_option("--min-item", min_item, "Minimum interactions per item (default 10; 0 for synthetic)");
  prepare->add_option("--cold-fraction", popt.cold_fraction, "Fraction of shared users held out per domain");
  prepare->add_flag("--no-validation", no_validation, "Do not hold out a validation interaction");
  prepare->add_option("--user-column", popt.columns.user_column, "User id column");
  prepare->add_option("--item-column", popt.columns.item_column, "Item id column");
  prepare->add_option("--timestamp-column", timestamp_column, "Timestamp column (optional)");
  prepare->add_option("--delimiter", delimiter, "auto, tab or comma")->check(CLI::IsMember({"auto", "tab", "comma"}));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train models");
  CommonFlags train_flags;
  train_flags.attach(train_cmd);
  std::string mode = "cdimf";
  train_cmd->add_option("-m,--mode", mode, "als-separate, als-joined, cdimf, cdimf-worker or cdimf-aggregator")
      ->check(CLI::IsMember({"als-separate", "als-joined", "cdimf", "cdimf-worker", "cdimf-aggregator"}));

  // federation flags shared by train --mode cdimf-* and the dedicated subcommands
  WorkerCommandOptions wopt;
  AggregatorCommandOptions aopt;
  double timeout_s = 600;
  auto attach_worker = [&](CLI::App* a) {
    a->add_option("--domain", wopt.domain, "Domain this worker owns");
    a->add_option("--aggregator", wopt.aggregator, "Aggregator host:port (or CDIMF_AGGREGATOR)");
    a->add_option("--shared-users", wopt.shared_users, "File with shared user ids, one per line");
    a->add_option("--checkpoint-dir", wopt.checkpoint_dir, "Where to save state if the session breaks");
  };
  auto attach_timeout = [&](CLI::App* a) { a->add_option("--timeout", timeout_s, "Network timeout in seconds"); };
  auto attach_listen = [&](CLI::App* a) { a->add_option("--listen", aopt.listen, "Listen address host:port"); };
  attach_worker(train_cmd);
  attach_listen(train_cmd);
  attach_timeout(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score saved models on held-out interactions");
  CommonFlags eval_flags;
  eval_flags.attach(eval_cmd);
  EvaluateOptions eopt;
  std::string eval_split = "test";
  std::string source, target;
  eval_cmd->add_option("--model-dir", eopt.model_dir, "Directory with model files (default: output_dir)");
  eval_cmd->add_option("--split", eval_split, "valid or test")->check(CLI::IsMember({"valid", "test"}));
  eval_cmd->add_option("--source", source, "Domain providing user factors (cold)");
  eval_cmd->add_option("--target", target, "Domain whose items are ranked");
  eval_cmd->add_option("--report", eopt.report, "Report path (default: <model-dir>/report.json)");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate every point of a parameter grid");
  CommonFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  SweepOptions sopt;
  std::string sweep_mode = "cdimf";
  std::string sweep_split;
  sweep_cmd->add_option("-g,--grid", sopt.grid, "Grid JSON: {\"consensus.rho\": [0, 0.1, 1], ...}")->required();
  sweep_cmd->add_option("-m,--mode", sweep_mode, "als-separate, als-joined or cdimf")
      ->check(CLI::IsMember({"als-separate", "als-joined", "cdimf"}));
  sweep_cmd->add_option("--split", sweep_split, "valid or test (default: valid when available)");
  sweep_cmd->add_option("--parallel", sopt.parallel, "Grid points run concurrently");
  sweep_cmd->add_option("--eval-every", sopt.eval_every, "Evaluate every N epochs");
  sweep_cmd->add_option("--csv", sopt.csv, "Output CSV (default: <output_dir>/sweep.csv)");

  // aggregator / worker
  auto* agg_cmd = app.add_subcommand("aggregator", "Run the federation aggregator");
  CommonFlags agg_flags;
  agg_flags.attach(agg_cmd);
  attach_listen(agg_cmd);
  attach_timeout(agg_cmd);
  auto* worker_cmd = app.add_subcommand("worker", "Run one domain as a federation worker");
  CommonFlags worker_flags;
  worker_flags.attach(worker_cmd);
  attach_worker(worker_cmd);
  attach_timeout(worker_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000));
    wopt.timeout = aopt.timeout = timeout;
    wopt.command_line = aopt.command_line = command_line;
    auto run_worker_cmd = [&](const RunConfig& config) {
      if (wopt.domain.empty()) throw ConfigError("worker mode needs --domain");
      cmd_worker(config, wopt, std::cout);
    };
    if (app.got_subcommand(prepare)) {
      for (const auto& in : inputs) {
        const auto eq = in.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--input must look like name=path, got '" + in + "'");
        popt.inputs.emplace_back(in.substr(0, eq), in.substr(eq + 1));
      }
      if (synthetic) popt.synthetic = spec;
      popt.scenario = parse_scenario(scenario);
      popt.out_dir = out_dir;
      if (min_user >= 0) popt.min_user = min_user;
      if (min_item >= 0) popt.min_item = min_item;
      popt.validation = !no_validation;
      if (!timestamp_column.empty()) popt.columns.timestamp_column = timestamp_column;
      popt.columns.delimiter = delimiter == "tab" ? '\t' : delimiter == "comma" ? ',' : '\0';
      cmd_prepare(popt, std::cout);
    } else if (app.got_subcommand(train_cmd)) {
      const auto config = train_flags.load();
      if (mode == "cdimf-worker") {
        run_worker_cmd(config);
      } else if (mode == "cdimf-aggregator") {
        cmd_aggregator(config, aopt, std::cout);
      } else {
        cmd_train(config, {parse_mode(mode), command_line}, std::cout);
      }
    } else if (app.got_subcommand(eval_cmd)) {
      const auto config = eval_flags.load();
      eopt.split = parse_split(eval_split);
      if (!source.empty()) eopt.source = source;
      if (!target.empty()) eopt.target = target;
      eopt.command_line = command_line;
      cmd_evaluate(config, eopt, std::cout);
    } else if (app.got_subcommand(sweep_cmd)) {
      const auto config = sweep_flags.load();
      sopt.mode = parse_mode(sweep_mode);
      if (!sweep_split.empty()) sopt.split = parse_split(sweep_split);
      sopt.command_line = command_line;
      cmd_sweep(config, sopt, std::cout);
    } else if (app.got_subcommand(agg_cmd)) {
      cmd_aggregator(agg_flags.load(), aopt, std::cout);
    } else if (app.got_subcommand(worker_cmd)) {
      run_worker_cmd(worker_flags.load());
    }
  } catch (const Error& e) {
    std::cerr << "cdimf: error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "cdimf: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "cdimf: unexpected error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}
