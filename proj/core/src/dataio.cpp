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
#include "cdimf/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "cdimf/error.hpp"

namespace cdimf {
namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::string, std::string>& key) const noexcept {
    const std::size_t h1 = std::hash<std::string>{}(key.first);
    const std::size_t h2 = std::hash<std::string>{}(key.second);
    return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
  }
};

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::size_t column_index(const std::vector<std::string_view>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("schema: column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

std::unordered_map<std::string, Index> count_by(const InteractionLog& log, bool by_user) {
  std::unordered_map<std::string, Index> counts;
  for (const auto& r : log.records) ++counts[by_user ? r.user : r.item];
  return counts;
}

}  // namespace

InteractionLog InteractionLog::from_records(std::string domain_name,
                                            std::vector<Interaction> records) {
  InteractionLog log;
  log.domain_name = std::move(domain_name);
  std::unordered_map<std::pair<std::string, std::string>, std::size_t, PairHash> seen;
  seen.reserve(records.size());
  for (auto& r : records) {
    if (r.user.empty() || r.item.empty()) throw DataError("interaction with empty user or item id");
    auto [it, inserted] = seen.try_emplace({r.user, r.item}, log.records.size());
    if (inserted) {
      log.records.push_back(std::move(r));
      continue;
    }
    auto& kept = log.records[it->second];
    if (r.timestamp && (!kept.timestamp || *r.timestamp < *kept.timestamp)) {
      kept.timestamp = r.timestamp;
    }
  }
  return log;
}

InteractionLog ingest_interactions(std::istream& in, const ColumnSchema& schema,
                                   std::string domain_name) {
  std::string line;
  std::vector<Interaction> records;
  if (!std::getline(in, line)) return InteractionLog::from_records(std::move(domain_name), {});
  strip_cr(line);
  const std::string header_line = line;
  char delimiter = schema.delimiter;
  if (delimiter == '\0') delimiter = header_line.find('\t') != std::string::npos ? '\t' : ',';
  const auto header = split_fields(header_line, delimiter);
  const std::size_t user_col = column_index(header, schema.user_column);
  const std::size_t item_col = column_index(header, schema.item_column);
  std::optional<std::size_t> time_col;
  if (schema.timestamp_column) time_col = column_index(header, *schema.timestamp_column);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, delimiter);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    Interaction rec{std::string(fields[user_col]), std::string(fields[item_col]), std::nullopt};
    if (rec.user.empty() || rec.item.empty()) {
      throw DataError("line " + std::to_string(line_no) + ": empty user or item id");
    }
    if (time_col) {
      const auto text = fields[*time_col];
      std::int64_t value = 0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw DataError("line " + std::to_string(line_no) + ": bad timestamp '" +
                        std::string(text) + "'");
      }
      rec.timestamp = value;
    }
    records.push_back(std::move(rec));
  }
  return InteractionLog::from_records(std::move(domain_name), std::move(records));
}

InteractionLog read_interactions(const std::filesystem::path& path, const ColumnSchema& schema,
                                 std::string domain_name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return ingest_interactions(in, schema, std::move(domain_name));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_interactions(std::ostream& out, const InteractionLog& log) {
  out << "user_id\titem_id\n";
  for (const auto& r : log.records) out << r.user << '\t' << r.item << '\n';
}

void write_interactions(const std::filesystem::path& path, const InteractionLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_interactions(out, log);
}

InteractionLog filter_core(const InteractionLog& log, Index min_user, Index min_item) {
  if (min_user < 1 || min_item < 1) throw ConfigError("filter_core: thresholds must be >= 1");
  const auto item_counts = count_by(log, false);
  InteractionLog items_kept{log.domain_name, {}};
  for (const auto& r : log.records) {
    if (item_counts.at(r.item) >= min_item) items_kept.records.push_back(r);
  }
  const auto user_counts = count_by(items_kept, true);
  InteractionLog out{log.domain_name, {}};
  for (const auto& r : items_kept.records) {
    if (user_counts.at(r.user) >= min_user) out.records.push_back(r);
  }
  return out;
}

CoreViolations check_core(const InteractionLog& log, Index min_user, Index min_item) {
  CoreViolations v;
  for (const auto& [id, n] : count_by(log, true)) v.users_below += n < min_user ? 1 : 0;
  for (const auto& [id, n] : count_by(log, false)) v.items_below += n < min_item ? 1 : 0;
  return v;
}

InteractionLog restrict_to_users(const InteractionLog& log, std::span<const std::string> users) {
  InteractionLog out{log.domain_name, {}};
  for (const auto& r : log.records) {
    if (std::binary_search(users.begin(), users.end(), r.user)) out.records.push_back(r);
  }
  return out;
}

std::vector<std::string> distinct_users(const InteractionLog& log) {
  std::vector<std::string> ids;
  ids.reserve(log.records.size());
  for (const auto& r : log.records) ids.push_back(r.user);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<std::string> intersect_sorted(std::span<const std::string> a,
                                          std::span<const std::string> b) {
  std::vector<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Vocabulary Vocabulary::sorted(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ordered(std::move(ids));
}

Vocabulary Vocabulary::ordered(std::vector<std::string> ids) {
  Vocabulary v;
  v.index_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!v.index_.emplace(ids[i], static_cast<Index>(i)).second) {
      throw DataError("duplicate id in vocabulary: " + ids[i]);
    }
  }
  v.ids_ = std::move(ids);
  return v;
}

std::optional<Index> Vocabulary::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> DomainDataset::shared_user_ids() const {
  std::vector<std::string> ids;
  ids.reserve(shared_rows.size());
  for (const Index row : shared_rows) ids.push_back(users.id(row));
  return ids;
}

void DomainDataset::validate() const {
  const Index nu = n_users();
  const Index ni = n_items();
  if (static_cast<Index>(row_ptr.size()) != nu + 1 || static_cast<Index>(col_ptr.size()) != ni + 1) {
    throw DataError(name + ": index pointer sizes do not match vocabularies");
  }
  if (col_idx.size() != row_idx.size()) throw DataError(name + ": row/column views differ in size");
  std::vector<std::pair<Index, Index>> by_row;
  std::vector<std::pair<Index, Index>> by_col;
  for (Index u = 0; u < nu; ++u) {
    for (const Index i : items_of(u)) by_row.emplace_back(u, i);
  }
  for (Index i = 0; i < ni; ++i) {
    for (const Index u : users_of(i)) by_col.emplace_back(u, i);
  }
  std::sort(by_row.begin(), by_row.end());
  std::sort(by_col.begin(), by_col.end());
  if (by_row != by_col) throw DataError(name + ": row and column views describe different entries");
  if (std::adjacent_find(by_row.begin(), by_row.end()) != by_row.end()) {
    throw DataError(name + ": duplicate entry");
  }
  for (std::size_t k = 0; k < shared_rows.size(); ++k) {
    if (shared_rows[k] < 0 || shared_rows[k] >= nu || (k > 0 && shared_rows[k] <= shared_rows[k - 1])) {
      throw DataError(name + ": shared_rows must be strictly increasing row indices");
    }
  }
}

namespace {

DomainDataset build_from_pairs(std::string name, Vocabulary users, Vocabulary items,
                               std::vector<std::pair<Index, Index>> pairs,
                               std::vector<Index> shared_rows) {
  DomainDataset d;
  d.name = std::move(name);
  d.users = std::move(users);
  d.items = std::move(items);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  const auto nu = static_cast<std::size_t>(d.n_users());
  const auto ni = static_cast<std::size_t>(d.n_items());

  d.row_ptr.assign(nu + 1, 0);
  d.col_ptr.assign(ni + 1, 0);
  for (const auto& [u, i] : pairs) {
    ++d.row_ptr[static_cast<std::size_t>(u) + 1];
    ++d.col_ptr[static_cast<std::size_t>(i) + 1];
  }
  std::partial_sum(d.row_ptr.begin(), d.row_ptr.end(), d.row_ptr.begin());
  std::partial_sum(d.col_ptr.begin(), d.col_ptr.end(), d.col_ptr.begin());

  d.col_idx.resize(pairs.size());
  d.row_idx.resize(pairs.size());
  std::vector<Index> col_fill(d.col_ptr.begin(), d.col_ptr.end() - 1);
  // pairs are sorted by (row, col): rows fill in order, and each column's
  // users also arrive in increasing row order.
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [u, i] = pairs[k];
    d.col_idx[k] = i;
    d.row_idx[static_cast<std::size_t>(col_fill[static_cast<std::size_t>(i)]++)] = u;
  }
  std::sort(shared_rows.begin(), shared_rows.end());
  shared_rows.erase(std::unique(shared_rows.begin(), shared_rows.end()), shared_rows.end());
  d.shared_rows = std::move(shared_rows);
  return d;
}

}  // namespace

DomainDataset build_dataset(const InteractionLog& log, std::span<const std::string> shared_users,
                            std::span<const std::string> extra_items) {
  std::vector<std::string> item_ids;
  item_ids.reserve(log.records.size() + extra_items.size());
  for (const auto& r : log.records) item_ids.push_back(r.item);
  item_ids.insert(item_ids.end(), extra_items.begin(), extra_items.end());
  Vocabulary users = Vocabulary::ordered(distinct_users(log));
  Vocabulary items = Vocabulary::sorted(std::move(item_ids));

  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(log.records.size());
  for (const auto& r : log.records) pairs.emplace_back(*users.find(r.user), *items.find(r.item));

  std::vector<Index> shared_rows;
  for (const auto& id : shared_users) {
    if (const auto row = users.find(id)) shared_rows.push_back(*row);
  }
  return build_from_pairs(log.domain_name, std::move(users), std::move(items), std::move(pairs),
                          std::move(shared_rows));
}

DomainDataset index_log(const InteractionLog& log, Vocabulary users, Vocabulary items,
                        std::span<const std::string> shared_users) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(log.records.size());
  for (const auto& r : log.records) {
    const auto u = users.find(r.user);
    const auto i = items.find(r.item);
    if (!u || !i) {
      throw DataError(log.domain_name + ": interaction (" + r.user + ", " + r.item +
                      ") is outside the model vocabulary");
    }
    pairs.emplace_back(*u, *i);
  }
  std::vector<Index> shared_rows;
  for (const auto& id : shared_users) {
    if (const auto row = users.find(id)) shared_rows.push_back(*row);
  }
  std::sort(shared_rows.begin(), shared_rows.end());
  return build_from_pairs(log.domain_name, std::move(users), std::move(items), std::move(pairs),
                          std::move(shared_rows));
}

InteractionLog to_log(const DomainDataset& data) {
  InteractionLog log{data.name, {}};
  log.records.reserve(static_cast<std::size_t>(data.n_entries()));
  for (Index u = 0; u < data.n_users(); ++u) {
    for (const Index i : data.items_of(u)) {
      log.records.push_back({data.users.id(u), data.items.id(i), std::nullopt});
    }
  }
  return log;
}

DomainDataset concatenate(std::span<const DomainDataset> domains, std::vector<Index>* item_offsets) {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::string name;
  if (item_offsets) item_offsets->clear();
  for (const auto& d : domains) {
    if (item_offsets) item_offsets->push_back(static_cast<Index>(item_ids.size()));
    user_ids.insert(user_ids.end(), d.users.ids().begin(), d.users.ids().end());
    for (const auto& item : d.items.ids()) item_ids.push_back(d.name + "::" + item);
    name += (name.empty() ? "" : "+") + d.name;
  }
  Vocabulary users = Vocabulary::sorted(std::move(user_ids));
  Vocabulary items = Vocabulary::ordered(std::move(item_ids));

  std::vector<std::pair<Index, Index>> pairs;
  Index offset = 0;
  for (const auto& d : domains) {
    for (Index u = 0; u < d.n_users(); ++u) {
      const Index row = *users.find(d.users.id(u));
      for (const Index i : d.items_of(u)) pairs.emplace_back(row, offset + i);
    }
    offset += d.n_items();
  }
  return build_from_pairs(std::move(name), std::move(users), std::move(items), std::move(pairs), {});
}

DatasetStats stats(const DomainDataset& data) {
  return {data.n_users(), data.n_items(), data.n_entries(),
          static_cast<Index>(data.shared_rows.size())};
}

std::string_view to_string(Scenario scenario) {
  return scenario == Scenario::kWarm ? "warm" : "cold";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "warm") return Scenario::kWarm;
  if (text == "cold") return Scenario::kCold;
  throw ConfigError("unknown scenario '" + std::string(text) + "' (expected warm or cold)");
}

SplitBundle split_leave_one_out(const DomainDataset& data, std::uint64_t seed,
                                bool hold_out_validation) {
  SplitBundle bundle;
  bundle.scenario = Scenario::kWarm;
  bundle.seed = seed;
  bundle.test.domain_name = data.name;
  bundle.validation.domain_name = data.name;

  std::mt19937_64 rng(seed);
  std::vector<std::pair<Index, Index>> kept;
  kept.reserve(static_cast<std::size_t>(data.n_entries()));
  std::vector<Index> history;
  for (Index u = 0; u < data.n_users(); ++u) {
    const auto items = data.items_of(u);
    history.assign(items.begin(), items.end());
    if (history.size() < 2) {
      if (!history.empty()) ++bundle.skipped_users;
      for (const Index i : history) kept.emplace_back(u, i);
      continue;
    }
    auto take = [&](InteractionLog& dest) {
      std::uniform_int_distribution<std::size_t> pick(0, history.size() - 1);
      const std::size_t k = pick(rng);
      dest.records.push_back({data.users.id(u), data.items.id(history[k]), std::nullopt});
      history.erase(history.begin() + static_cast<std::ptrdiff_t>(k));
    };
    take(bundle.test);
    if (hold_out_validation && history.size() >= 2) take(bundle.validation);
    for (const Index i : history) kept.emplace_back(u, i);
  }
  bundle.train = build_from_pairs(data.name, data.users, data.items, std::move(kept), data.shared_rows);
  return bundle;
}

std::pair<SplitBundle, SplitBundle> split_cold_start(const InteractionLog& log_a,
                                                     const InteractionLog& log_b,
                                                     double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 0.5)) {
    throw ConfigError("split_cold_start: test_fraction must lie in (0, 0.5)");
  }
  const auto users_a = distinct_users(log_a);
  const auto users_b = distinct_users(log_b);
  std::vector<std::string> shared = intersect_sorted(users_a, users_b);
  const auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(shared.size()));
  if (n_test == 0 || 2 * n_test > shared.size()) {
    throw DataError("split_cold_start: " + std::to_string(shared.size()) +
                    " shared users are too few to draw two disjoint test sets");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> order = shared;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::string> test_a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::string> test_b(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                                  order.begin() + static_cast<std::ptrdiff_t>(2 * n_test));
  std::sort(test_a.begin(), test_a.end());
  std::sort(test_b.begin(), test_b.end());

  std::vector<std::string> consensus;
  for (const auto& id : shared) {
    if (!std::binary_search(test_a.begin(), test_a.end(), id) &&
        !std::binary_search(test_b.begin(), test_b.end(), id)) {
      consensus.push_back(id);
    }
  }

  auto make = [&](const InteractionLog& log, const std::vector<std::string>& test_users) {
    SplitBundle bundle;
    bundle.scenario = Scenario::kCold;
    bundle.seed = seed;
    bundle.test.domain_name = log.domain_name;
    bundle.validation.domain_name = log.domain_name;
    InteractionLog train{log.domain_name, {}};
    std::vector<std::string> catalog;
    for (const auto& r : log.records) {
      if (std::binary_search(test_users.begin(), test_users.end(), r.user)) {
        bundle.test.records.push_back(r);
        catalog.push_back(r.item);
      } else {
        train.records.push_back(r);
      }
    }
    bundle.train = build_dataset(train, consensus, catalog);
    return bundle;
  };
  return {make(log_a, test_a), make(log_b, test_b)};
}

}  // namespace cdimf
