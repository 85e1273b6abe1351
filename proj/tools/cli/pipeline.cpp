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
#include "cli/pipeline.hpp"

#include <fstream>

#include "cdimf/error.hpp"

namespace cdimf::cli {
namespace {

InteractionLog read_optional(const std::optional<fs::path>& path, const ColumnSchema& columns,
                             const std::string& name) {
  if (!path) return InteractionLog{name, {}};
  return read_interactions(*path, columns, name);
}

const LoadedDomain& find_domain(std::span<const LoadedDomain> domains, const std::string& name) {
  for (const auto& d : domains) {
    if (d.name == name) return d;
  }
  throw ConfigError("no loaded domain named '" + name + "'");
}

const DomainModel& find_model(std::span<const DomainModel> models, const std::string& name) {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw ConfigError("no model for domain '" + name + "'");
}

const InteractionLog& held_out(const LoadedDomain& d, Split split) {
  const auto& log = split == Split::kValid ? d.valid : d.test;
  if (log.empty()) {
    throw ConfigError("domain '" + d.name + "' has no " +
                      (split == Split::kValid ? "validation" : "test") + " interactions");
  }
  return log;
}

/// Training interactions re-indexed in the model's row order.
DomainDataset in_model_order(const DomainModel& m, const LoadedDomain& d) {
  if (m.users.ids() == d.train.users.ids() && m.items.ids() == d.train.items.ids()) return d.train;
  return index_log(to_log(d.train), m.users, m.items);
}

SolverConfig common_solver(std::span<const LoadedDomain> domains) {
  const auto& first = domains.front().solver;
  for (const auto& d : domains) {
    const auto& s = d.solver;
    if (s.d != first.d || s.alpha != first.alpha || s.lambda != first.lambda || s.nu != first.nu ||
        s.sigma != first.sigma) {
      throw ConfigError("als-joined trains one model and needs the same solver settings in every domain");
    }
  }
  return first;
}

}  // namespace

Mode parse_mode(std::string_view text) {
  if (text == "als-separate") return Mode::kAlsSeparate;
  if (text == "als-joined") return Mode::kAlsJoined;
  if (text == "cdimf") return Mode::kCdimf;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kAlsSeparate: return "als-separate";
    case Mode::kAlsJoined: return "als-joined";
    case Mode::kCdimf: return "cdimf";
  }
  return "?";
}

std::vector<std::string> shared_users_of(const RunConfig& config) {
  std::vector<std::string> shared;
  for (std::size_t k = 0; k < config.domains.size(); ++k) {
    const auto& d = config.domains[k];
    const auto users = distinct_users(read_interactions(d.train, config.columns, d.name));
    shared = k == 0 ? users : intersect_sorted(shared, users);
  }
  return shared;
}

std::vector<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

void write_id_list(const fs::path& path, std::span<const std::string> ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& id : ids) out << id << '\n';
}

LoadedDomain load_domain(const RunConfig& config, std::size_t index,
                         std::span<const std::string> shared_users) {
  const auto& e = config.domains.at(index);
  LoadedDomain d;
  d.name = e.name;
  d.solver = e.solver;
  const auto train = read_interactions(e.train, config.columns, e.name);
  d.valid = read_optional(e.valid, config.columns, e.name);
  d.test = read_optional(e.test, config.columns, e.name);
  std::vector<std::string> extra;
  for (const auto* log : {&d.valid, &d.test}) {
    for (const auto& r : log->records) extra.push_back(r.item);
  }
  d.train = build_dataset(train, shared_users, extra);
  return d;
}

std::vector<LoadedDomain> load_domains(const RunConfig& config) {
  const auto shared = shared_users_of(config);
  std::vector<LoadedDomain> out;
  for (std::size_t k = 0; k < config.domains.size(); ++k) out.push_back(load_domain(config, k, shared));
  return out;
}

void write_model(const fs::path& dir, const DomainModel& m) {
  fs::create_directories(dir);
  save_factors(dir / (m.name + ".users.cdmf"), m.model.users);
  save_factors(dir / (m.name + ".items.cdmf"), m.model.items);
  write_id_list(dir / (m.name + ".users.txt"), m.users.ids());
  write_id_list(dir / (m.name + ".items.txt"), m.items.ids());
}

DomainModel read_model(const fs::path& dir, const std::string& name) {
  DomainModel m;
  m.name = name;
  m.model.users = load_factors(dir / (name + ".users.cdmf"));
  m.model.items = load_factors(dir / (name + ".items.cdmf"));
  m.users = Vocabulary::ordered(read_id_list(dir / (name + ".users.txt")));
  m.items = Vocabulary::ordered(read_id_list(dir / (name + ".items.txt")));
  if (m.model.users.rows() != m.users.size() || m.model.items.rows() != m.items.size()) {
    throw DataError("model '" + name + "' in " + dir.string() + ": factor rows do not match the id lists");
  }
  if (m.model.users.dim() != m.model.items.dim()) {
    throw DataError("model '" + name + "' in " + dir.string() + ": user and item widths differ");
  }
  m.model.config.d = m.model.users.dim();
  return m;
}

std::vector<DomainModel> split_joined(const FactorModel& joined, const DomainDataset& joined_data,
                                      const std::vector<Index>& offsets,
                                      std::span<const LoadedDomain> domains) {
  std::vector<DomainModel> out;
  for (std::size_t k = 0; k < domains.size(); ++k) {
    const auto& d = domains[k];
    DomainModel m;
    m.name = d.name;
    m.model.config = joined.config;
    m.model.users = joined.users;
    m.model.items = {joined.items.values.middleRows(offsets[k], d.train.n_items()), FactorRole::kItem};
    m.users = joined_data.users;
    m.items = d.train.items;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EvalCase> evaluate_models(Scenario scenario, std::span<const DomainModel> models,
                                      std::span<const LoadedDomain> domains, Split split,
                                      const EvalConfig& eval, int threads,
                                      std::optional<std::pair<std::string, std::string>> pair) {
  std::vector<std::pair<std::string, std::string>> jobs;
  if (pair) {
    jobs.push_back(*pair);
  } else if (scenario == Scenario::kWarm) {
    for (const auto& d : domains) jobs.emplace_back(d.name, d.name);
  } else {
    if (domains.size() != 2) {
      throw ConfigError("cold evaluation with more than two domains needs an explicit source and target");
    }
    jobs.emplace_back(domains[1].name, domains[0].name);
    jobs.emplace_back(domains[0].name, domains[1].name);
  }
  std::vector<EvalCase> out;
  for (const auto& [source, target] : jobs) {
    const auto& sm = find_model(models, source);
    const auto& tm = find_model(models, target);
    const auto& sd = find_domain(domains, source);
    const auto& td = find_domain(domains, target);
    const auto source_train = in_model_order(sm, sd);
    const auto target_train = source == target ? source_train : in_model_order(tm, td);
    out.push_back({source, target,
                   evaluate_cold(sm.model, source_train, tm.model, target_train, held_out(td, split),
                                 eval, threads)});
  }
  return out;
}

RunOutcome run_training(const RunConfig& config, std::span<const LoadedDomain> domains,
                        const RunOptions& options) {
  if (domains.empty()) throw ConfigError("no domains to train");
  if (options.mode == Mode::kCdimf && domains.size() < 2) {
    throw ConfigError("cdimf needs at least two domains");
  }
  const int epochs = config.consensus.total_epochs();
  const int threads = config.threads;
  RunOutcome outcome;

  auto record_epoch = [&](int epoch, bool exchanged, std::span<const DomainModel> models) {
    if (!options.eval_each_epoch) return;
    if (epoch % std::max(1, options.eval_every) != 0 && epoch != epochs) return;
    outcome.epochs.push_back({epoch, exchanged,
                              evaluate_models(config.scenario, models, domains, *options.eval_each_epoch,
                                              config.eval, threads)});
  };

  switch (options.mode) {
    case Mode::kAlsSeparate: {
      if (!options.eval_each_epoch) {
        for (std::size_t k = 0; k < domains.size(); ++k) {
          const auto& d = domains[k];
          outcome.models.push_back({d.name,
                                    train_als(d.train, d.solver, epochs,
                                              domain_seed(config.seed, static_cast<int>(k)), {}, threads),
                                    d.train.users, d.train.items});
        }
        break;
      }
      // Step all domains in lockstep so each epoch can be evaluated jointly.
      std::vector<LocalDomain> locals;
      for (std::size_t k = 0; k < domains.size(); ++k) {
        locals.emplace_back(domains[k].train, domains[k].solver,
                            domain_seed(config.seed, static_cast<int>(k)), threads);
      }
      for (int epoch = 1; epoch <= epochs; ++epoch) {
        std::vector<DomainModel> models;
        for (std::size_t k = 0; k < locals.size(); ++k) {
          if (!locals[k].local_epoch(0.0, nullptr)) {
            outcome.diverged = true;
            break;
          }
          models.push_back({domains[k].name, locals[k].model(), domains[k].train.users, domains[k].train.items});
        }
        if (outcome.diverged) break;
        record_epoch(epoch, false, models);
      }
      for (std::size_t k = 0; k < locals.size(); ++k) {
        outcome.models.push_back({domains[k].name, locals[k].model(), domains[k].train.users,
                                  domains[k].train.items});
      }
      break;
    }
    case Mode::kAlsJoined: {
      std::vector<DomainDataset> parts;
      for (const auto& d : domains) parts.push_back(d.train);
      std::vector<Index> offsets;
      const auto joined = concatenate(parts, &offsets);
      SweepObserver observer;
      if (options.eval_each_epoch) {
        observer = [&](int epoch, HalfSweep side, const FactorModel& model) {
          if (side != HalfSweep::kItems) return;
          record_epoch(epoch, false, split_joined(model, joined, offsets, domains));
        };
      }
      FactorModel model;
      try {
        model = train_als(joined, common_solver(domains), epochs, config.seed, observer, threads);
      } catch (const NumericError&) {
        outcome.diverged = true;
        break;
      }
      if (!model.users.all_finite() || !model.items.all_finite()) outcome.diverged = true;
      outcome.models = split_joined(model, joined, offsets, domains);
      break;
    }
    case Mode::kCdimf: {
      std::vector<DomainSpec> specs;
      for (const auto& d : domains) specs.push_back({&d.train, d.solver});
      TrainObserver observer;
      if (options.eval_each_epoch) {
        observer.on_epoch = [&](int epoch, bool exchanged, std::span<const LocalDomain> locals) {
          std::vector<DomainModel> models;
          for (std::size_t k = 0; k < locals.size(); ++k) {
            models.push_back({domains[k].name, locals[k].model(), domains[k].train.users, domains[k].train.items});
          }
          record_epoch(epoch, exchanged, models);
        };
      }
      auto result = train(specs, config.consensus, config.seed, observer, threads);
      outcome.diverged = result.diverged;
      outcome.rounds = std::move(result.rounds);
      outcome.alignment = std::move(result.state.alignment);
      for (std::size_t k = 0; k < domains.size(); ++k) {
        outcome.models.push_back({domains[k].name, std::move(result.models[k]), domains[k].train.users,
                                  domains[k].train.items});
      }
      break;
    }
  }
  return outcome;
}

}  // namespace cdimf::cli
