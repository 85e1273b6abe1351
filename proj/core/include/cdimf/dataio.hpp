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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdimf/types.hpp"

namespace cdimf {

struct Interaction {
  std::string user;
  std::string item;
  std::optional<std::int64_t> timestamp;
};

/// Implicit-feedback records of one domain, at most one per (user, item).
struct InteractionLog {
  std::string domain_name;
  std::vector<Interaction> records;

  /// Builds a log from raw records: drops nothing but duplicates, keeping the
  /// earliest timestamp of each (user, item) pair at its first position.
  static InteractionLog from_records(std::string domain_name, std::vector<Interaction> records);

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Column mapping for delimited input. A delimiter of '\0' means auto-detect
/// (tab if the header contains one, otherwise comma).
struct ColumnSchema {
  std::string user_column = "user_id";
  std::string item_column = "item_id";
  std::optional<std::string> timestamp_column;
  char delimiter = '\0';
};

/// Reads a header-prefixed delimited stream. Extra columns (ratings, text)
/// are ignored; every record is binarized. Throws DataError with the 1-based
/// line number for malformed rows and ConfigError for unmapped columns.
InteractionLog ingest_interactions(std::istream& in, const ColumnSchema& schema,
                                   std::string domain_name = {});

InteractionLog read_interactions(const std::filesystem::path& path, const ColumnSchema& schema,
                                 std::string domain_name = {});

/// Writes "user_id<TAB>item_id" with a header row, in record order.
void write_interactions(std::ostream& out, const InteractionLog& log);
void write_interactions(const std::filesystem::path& path, const InteractionLog& log);

/// Drops items with fewer than min_item records, then users with fewer than
/// min_user among the survivors. One pass; not iterated to a fixed point.
InteractionLog filter_core(const InteractionLog& log, Index min_user = 5, Index min_item = 10);

struct CoreViolations {
  Index users_below = 0;
  Index items_below = 0;
  bool ok() const { return users_below == 0 && items_below == 0; }
};

/// Post-hoc check of the core thresholds on a filtered log.
CoreViolations check_core(const InteractionLog& log, Index min_user, Index min_item);

/// Records whose user is in \p users (sorted, unique).
InteractionLog restrict_to_users(const InteractionLog& log, std::span<const std::string> users);

/// Sorted distinct user ids of a log.
std::vector<std::string> distinct_users(const InteractionLog& log);

/// Sorted intersection of sorted id lists.
std::vector<std::string> intersect_sorted(std::span<const std::string> a,
                                          std::span<const std::string> b);

/// Bijection between opaque string ids and dense indices.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Sorted, de-duplicated ids.
  static Vocabulary sorted(std::vector<std::string> ids);
  /// Keeps the given order; throws DataError on duplicates.
  static Vocabulary ordered(std::vector<std::string> ids);

  Index size() const { return static_cast<Index>(ids_.size()); }
  const std::string& id(Index index) const { return ids_.at(static_cast<std::size_t>(index)); }
  std::optional<Index> find(std::string_view id) const;
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> index_;
};

/// Indexed binary user x item matrix of one domain with both compressed-row
/// and compressed-column views of the same entry set.
struct DomainDataset {
  std::string name;
  Vocabulary users;
  Vocabulary items;
  std::vector<Index> row_ptr{0};
  std::vector<Index> col_idx;
  std::vector<Index> col_ptr{0};
  std::vector<Index> row_idx;
  /// Rows of users in the cross-domain shared set, strictly increasing.
  std::vector<Index> shared_rows;

  Index n_users() const { return users.size(); }
  Index n_items() const { return items.size(); }
  Index n_entries() const { return static_cast<Index>(col_idx.size()); }

  std::span<const Index> items_of(Index row) const {
    return {col_idx.data() + row_ptr[row], col_idx.data() + row_ptr[row + 1]};
  }
  std::span<const Index> users_of(Index col) const {
    return {row_idx.data() + col_ptr[col], row_idx.data() + col_ptr[col + 1]};
  }

  /// Ids of the shared rows, in row order (lexicographic by construction).
  std::vector<std::string> shared_user_ids() const;

  /// Throws DataError if the row/column views disagree or shared_rows is
  /// not strictly increasing and in range.
  void validate() const;
};

/// Builds the matrix from a log. Users are indexed in sorted id order; the
/// item catalog is the log's items plus \p extra_items (e.g. held-out items).
/// \p shared_users lists the cross-domain shared ids (any order); ids not
/// present in the log are ignored.
DomainDataset build_dataset(const InteractionLog& log, std::span<const std::string> shared_users,
                            std::span<const std::string> extra_items = {});

/// Indexes \p log against fixed vocabularies, e.g. the row order of a saved
/// model. Throws DataError on ids outside them.
DomainDataset index_log(const InteractionLog& log, Vocabulary users, Vocabulary items,
                        std::span<const std::string> shared_users = {});

/// The entry set as a log, rows in order.
InteractionLog to_log(const DomainDataset& data);

/// Joins domains into one matrix: union of users, disjoint item columns laid
/// out domain by domain. Item ids become "<domain>::<item>". Writes each
/// domain's first column into \p item_offsets when given.
DomainDataset concatenate(std::span<const DomainDataset> domains,
                          std::vector<Index>* item_offsets = nullptr);

struct DatasetStats {
  Index n_users = 0;
  Index n_items = 0;
  Index n_ratings = 0;
  Index n_shared = 0;
};

DatasetStats stats(const DomainDataset& data);

enum class Scenario { kWarm, kCold };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

struct SplitBundle {
  DomainDataset train;
  InteractionLog validation;
  InteractionLog test;
  Scenario scenario = Scenario::kWarm;
  std::uint64_t seed = 0;
  /// Users left out of the test set because they had a single interaction.
  Index skipped_users = 0;
};

/// Moves one uniformly chosen interaction of every user to the test set.
/// With \p hold_out_validation, users with at least three interactions also
/// give one more to the validation set. The catalog and user rows of the
/// training matrix are those of \p data.
SplitBundle split_leave_one_out(const DomainDataset& data, std::uint64_t seed,
                                bool hold_out_validation = false);

/// Draws two disjoint sets of shared users, each of floor(test_fraction *
/// |shared|) users; set A's whole history in \p log_a becomes A's test set
/// and likewise for B. The shared set of both training matrices excludes
/// every test user.
std::pair<SplitBundle, SplitBundle> split_cold_start(const InteractionLog& log_a,
                                                     const InteractionLog& log_b,
                                                     double test_fraction, std::uint64_t seed);

}  // namespace cdimf
