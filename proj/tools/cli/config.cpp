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
#include "cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <openssl/evp.h>

#include "cdimf/error.hpp"

namespace cdimf::cli {
namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

SolverConfig read_solver(const json& j, SolverConfig c, const std::string& where) {
  check_keys(j, {"d", "alpha", "lambda", "nu", "sigma", "rho_on_private_users", "rho_on_items"}, where);
  read(j, "d", c.d, where);
  read(j, "alpha", c.alpha, where);
  read(j, "lambda", c.lambda, where);
  read(j, "nu", c.nu, where);
  read(j, "sigma", c.sigma, where);
  read(j, "rho_on_private_users", c.rho_on_private_users, where);
  read(j, "rho_on_items", c.rho_on_items, where);
  c.validate();
  return c;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

bool is_path_key(std::string_view key) {
  return key == "output_dir" || key.ends_with(".train") || key.ends_with(".valid") ||
         key.ends_with(".test");
}

}  // namespace

const DomainEntry& RunConfig::domain(std::string_view name) const {
  return domains[domain_index(name)];
}

std::size_t RunConfig::domain_index(std::string_view name) const {
  for (std::size_t k = 0; k < domains.size(); ++k) {
    if (domains[k].name == name) return k;
  }
  throw ConfigError("no domain named '" + std::string(name) + "' in the config");
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if (is_path_key(key) && value.is_string()) {
    value = fs::absolute(value.get<std::string>()).lexically_normal().string();
  }
  set_path(j, key, std::move(value));
}

void set_path(json& j, const std::string& key, json value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad override key '" + key + "'");
    const bool index = std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; });
    json* next = nullptr;
    if (index && node->is_array()) {
      const auto k = std::stoul(part);
      if (k >= node->size()) throw ConfigError("override '" + key + "': index out of range");
      next = &(*node)[k];
    } else if (node->is_array()) {
      // Array elements can also be addressed by their "name" field.
      for (auto& element : *node) {
        if (element.is_object() && element.value("name", std::string()) == part) next = &element;
      }
      if (next == nullptr) throw ConfigError("override '" + key + "': no element named '" + part + "'");
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is not an object");
      next = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *next = std::move(value);
      return;
    }
    node = next;
    start = dot + 1;
  }
}

RunConfig parse_run_config(json j, const fs::path& base_dir) {
  check_keys(j, {"scenario", "domains", "columns", "solver", "consensus", "eval", "output_dir", "seed",
                 "threads"},
             "config");
  RunConfig c;
  if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  if (j.contains("output_dir")) {
    c.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    j["output_dir"] = c.output_dir.string();
  }

  if (j.contains("columns")) {
    const auto& col = j.at("columns");
    check_keys(col, {"user", "item", "timestamp", "delimiter"}, "columns");
    read(col, "user", c.columns.user_column, "columns");
    read(col, "item", c.columns.item_column, "columns");
    if (col.contains("timestamp") && !col.at("timestamp").is_null()) {
      c.columns.timestamp_column = col.at("timestamp").get<std::string>();
    }
    std::string delim = "auto";
    read(col, "delimiter", delim, "columns");
    if (delim == "tab" || delim == "\t") c.columns.delimiter = '\t';
    else if (delim == "comma" || delim == ",") c.columns.delimiter = ',';
    else if (delim != "auto") throw ConfigError("columns.delimiter must be auto, tab or comma");
  }

  SolverConfig shared_solver;
  if (j.contains("solver")) shared_solver = read_solver(j.at("solver"), shared_solver, "solver");

  if (!j.contains("domains") || !j.at("domains").is_array() || j.at("domains").empty()) {
    throw ConfigError("config needs a non-empty 'domains' list");
  }
  std::set<std::string> names;
  for (std::size_t k = 0; k < j["domains"].size(); ++k) {
    auto& d = j["domains"][k];
    const std::string where = "domains." + std::to_string(k);
    check_keys(d, {"name", "train", "valid", "test", "solver"}, where);
    DomainEntry e;
    read(d, "name", e.name, where);
    if (e.name.empty()) throw ConfigError(where + ".name is required");
    if (!names.insert(e.name).second) throw ConfigError("duplicate domain name '" + e.name + "'");
    if (!d.contains("train")) throw ConfigError(where + ".train is required");
    e.train = resolve(d.at("train").get<std::string>(), base_dir);
    d["train"] = e.train.string();
    for (const char* key : {"valid", "test"}) {
      if (d.contains(key) && !d.at(key).is_null()) {
        const auto p = resolve(d.at(key).get<std::string>(), base_dir);
        d[key] = p.string();
        (std::string_view(key) == "valid" ? e.valid : e.test) = p;
      }
    }
    e.solver = d.contains("solver") ? read_solver(d.at("solver"), shared_solver, where + ".solver")
                                    : shared_solver;
    c.domains.push_back(std::move(e));
  }

  if (j.contains("consensus")) {
    const auto& cj = j.at("consensus");
    check_keys(cj, {"rho", "prox", "lambda_g", "aggregation_period", "outer_rounds"}, "consensus");
    read(cj, "rho", c.consensus.rho, "consensus");
    read(cj, "lambda_g", c.consensus.prox.lambda_g, "consensus");
    read(cj, "aggregation_period", c.consensus.aggregation_period, "consensus");
    read(cj, "outer_rounds", c.consensus.outer_rounds, "consensus");
    std::string prox = "identity";
    read(cj, "prox", prox, "consensus");
    if (prox == "identity") c.consensus.prox.kind = ProxConfig::Kind::kIdentity;
    else if (prox == "l2") c.consensus.prox.kind = ProxConfig::Kind::kL2;
    else throw ConfigError("consensus.prox must be 'identity' or 'l2'");
  }
  c.consensus.n_domains = static_cast<int>(c.domains.size());
  c.consensus.validate();

  if (j.contains("eval")) {
    const auto& ej = j.at("eval");
    check_keys(ej, {"k", "n_negatives", "seed"}, "eval");
    read(ej, "k", c.eval.k, "eval");
    read(ej, "n_negatives", c.eval.n_negatives, "eval");
    read(ej, "seed", c.eval.seed, "eval");
  }
  c.eval.validate();
  c.effective = std::move(j);
  return c;
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j = json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  return parse_run_config(std::move(j), fs::absolute(path).parent_path());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Error::Category::kConfig, "SHA-256 failed");
  }
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += digits[md[k] >> 4];
    out += digits[md[k] & 15];
  }
  return out;
}

std::string config_hash(const RunConfig& config) { return sha256_hex(config.effective.dump()); }

json to_json(const SolverConfig& c) {
  return {{"d", c.d},         {"alpha", c.alpha}, {"lambda", c.lambda},
          {"nu", c.nu},       {"sigma", c.sigma}, {"rho_on_private_users", c.rho_on_private_users},
          {"rho_on_items", c.rho_on_items}};
}

json to_json(const EvalReport& r) {
  return {{"hr", r.hr},
          {"ndcg", r.ndcg},
          {"coverage", r.coverage},
          {"n_cases", r.n_cases},
          {"skipped_users", r.skipped_users},
          {"skipped_items", r.skipped_items},
          {"k", r.config.k},
          {"n_negatives", r.config.n_negatives},
          {"seed", r.config.seed}};
}

}  // namespace cdimf::cli
