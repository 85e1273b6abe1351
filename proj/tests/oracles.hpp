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

// Independent reference computations for the tests. Nothing here calls the
// production solver or metric code paths it is compared against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cdimf/dataio.hpp"
#include "cdimf/solver.hpp"

namespace oracle {

using cdimf::Index;
using cdimf::Matrix;
using cdimf::Vector;

inline Matrix naive_gram(const Matrix& f) {
  Matrix g = Matrix::Zero(f.cols(), f.cols());
  for (Index a = 0; a < f.cols(); ++a)
    for (Index b = 0; b < f.cols(); ++b)
      for (Index r = 0; r < f.rows(); ++r) g(a, b) += f(r, a) * f(r, b);
  return g;
}

inline double naive_reg(Index own, Index catalog, const cdimf::SolverConfig& c) {
  const double base = static_cast<double>(own) + c.alpha * static_cast<double>(catalog);
  return c.lambda * (c.nu == 0.0 ? 1.0 : std::pow(base, c.nu));
}

/// Dense observed-indicator matrix.
inline std::vector<std::vector<int>> dense_p(const cdimf::DomainDataset& data) {
  std::vector<std::vector<int>> p(data.n_users(), std::vector<int>(data.n_items(), 0));
  for (Index u = 0; u < data.n_users(); ++u)
    for (Index i : data.items_of(u)) p[u][i] = 1;
  return p;
}

/// Sum over every (u, i) pair with explicit weights; the pull term follows
/// the same flags as the production objective.
inline double naive_objective(const Matrix& x, const Matrix& y, const cdimf::DomainDataset& data,
                              const cdimf::SolverConfig& c, double rho, const Matrix* target) {
  const auto p = dense_p(data);
  std::vector<Index> user_count(data.n_users(), 0), item_count(data.n_items(), 0);
  for (Index u = 0; u < data.n_users(); ++u)
    for (Index i = 0; i < data.n_items(); ++i)
      if (p[u][i]) ++user_count[u], ++item_count[i];
  double total = 0.0;
  for (Index u = 0; u < data.n_users(); ++u) {
    for (Index i = 0; i < data.n_items(); ++i) {
      double s = 0.0;
      for (Index k = 0; k < x.cols(); ++k) s += x(u, k) * y(i, k);
      if (p[u][i]) total += 0.5 * (s - 1.0) * (s - 1.0);
      total += 0.5 * c.alpha * s * s;
    }
  }
  for (Index u = 0; u < data.n_users(); ++u)
    total += 0.5 * naive_reg(user_count[u], data.n_items(), c) * x.row(u).squaredNorm();
  for (Index i = 0; i < data.n_items(); ++i)
    total += 0.5 * naive_reg(item_count[i], data.n_users(), c) * y.row(i).squaredNorm();
  if (rho != 0.0) {
    std::map<Index, Index> shared;
    for (std::size_t k = 0; k < data.shared_rows.size(); ++k) shared[data.shared_rows[k]] = k;
    for (Index u = 0; u < data.n_users(); ++u) {
      auto it = shared.find(u);
      if (it != shared.end()) {
        Vector h = target ? Vector(target->row(it->second).transpose()) : Vector::Zero(x.cols());
        total += 0.5 * rho * (x.row(u).transpose() - h).squaredNorm();
      } else if (c.rho_on_private_users) {
        total += 0.5 * rho * x.row(u).squaredNorm();
      }
    }
    if (c.rho_on_items) total += 0.5 * rho * y.squaredNorm();
  }
  return total;
}

/// Minimizer of one row's objective as a stacked weighted least-squares
/// problem solved by QR (no normal equations, no Gram matrix).
///   rows j in observed : 1 * (y_j . a - 1)
///   every row i        : sqrt(alpha) * (y_i . a)
///   ridge              : sqrt(lambda_row) * a
///   pull               : sqrt(rho) * (a - h)
inline Vector stacked_lsq_row(const Matrix& opposite, const std::vector<Index>& observed,
                              double alpha, double lambda_row, double rho, const Vector& h) {
  const Index d = opposite.cols();
  const Index n = static_cast<Index>(observed.size()) + opposite.rows() + 2 * d;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  Index r = 0;
  for (Index j : observed) { a.row(r) = opposite.row(j); b(r) = 1.0; ++r; }
  for (Index i = 0; i < opposite.rows(); ++i) { a.row(r) = std::sqrt(alpha) * opposite.row(i); ++r; }
  for (Index k = 0; k < d; ++k) { a(r, k) = std::sqrt(lambda_row); ++r; }
  for (Index k = 0; k < d; ++k) { a(r, k) = std::sqrt(rho); b(r) = std::sqrt(rho) * h(k); ++r; }
  return a.colPivHouseholderQr().solve(b);
}

/// Central finite differences of f with respect to every entry of m.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& m,
                          double step = 1e-5) {
  Matrix g(m.rows(), m.cols());
  Matrix probe = m;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const double keep = probe(r, c);
      probe(r, c) = keep + step;
      const double up = f(probe);
      probe(r, c) = keep - step;
      const double down = f(probe);
      probe(r, c) = keep;
      g(r, c) = (up - down) / (2 * step);
    }
  }
  return g;
}

/// Rank by sorting every candidate; the target sorts after equal scores.
inline Index full_sort_rank(const Vector& user, const Matrix& items, const std::vector<Index>& cand) {
  struct Entry { double score; int is_target; Index pos; };
  std::vector<Entry> entries;
  for (std::size_t c = 0; c < cand.size(); ++c) {
    double s = 0.0;
    for (Index k = 0; k < user.size(); ++k) s += items(cand[c], k) * user(k);
    entries.push_back({s, c == 0 ? 1 : 0, static_cast<Index>(c)});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.is_target != b.is_target) return a.is_target < b.is_target;
    return a.pos < b.pos;
  });
  for (std::size_t k = 0; k < entries.size(); ++k)
    if (entries[k].is_target) return static_cast<Index>(k) + 1;
  return -1;
}

/// Item-then-user core filter by explicit recounting over std::map.
inline std::set<std::pair<std::string, std::string>> recount_core(
    const std::vector<std::pair<std::string, std::string>>& pairs, Index min_user, Index min_item) {
  std::map<std::string, Index> items;
  for (auto& [u, i] : pairs) items[i]++;
  std::vector<std::pair<std::string, std::string>> stage;
  for (auto& pr : pairs) if (items[pr.second] >= min_item) stage.push_back(pr);
  std::map<std::string, Index> users;
  for (auto& [u, i] : stage) users[u]++;
  std::set<std::pair<std::string, std::string>> out;
  for (auto& pr : stage) if (users[pr.first] >= min_user) out.insert(pr);
  return out;
}

}  // namespace oracle
