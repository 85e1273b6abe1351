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
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "cdimf/error.hpp"
#include "cdimf/solver.hpp"
#include "cdimf/synthetic.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cdimf;

namespace {

DomainDataset small_domain(std::uint64_t seed, Index shared = 6) {
  SyntheticSpec spec;
  spec.n_shared_users = 14;
  spec.n_private_users = 4;
  spec.n_items = 16;
  spec.d = 3;
  spec.min_interactions = 2;
  spec.max_interactions = 7;
  spec.seed = seed;
  const auto logs = make_synthetic_logs(spec);
  auto users = distinct_users(logs[0]);
  std::vector<std::string> s;
  for (const auto& u : users)
    if (u.rfind("user_", 0) == 0 && static_cast<Index>(s.size()) < shared) s.push_back(u);
  return build_dataset(logs[0], s);
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("reg_weight") {
  SolverConfig c;
  c.lambda = 0.1;
  c.alpha = 0.5;
  c.nu = 1.0;
  CHECK(reg_weight(3, 6, c) == doctest::Approx(0.6).epsilon(1e-15));
  c.nu = 0.0;
  CHECK(reg_weight(3, 6, c) == 0.1);
  c.alpha = 0.0;
  CHECK(reg_weight(0, 6, c) == 0.1);
  c.nu = 0.5;
  CHECK(reg_weight(0, 6, c) == 0.0);
  for (Index own : {0, 1, 7, 40}) {
    for (double nu : {0.0, 0.25, 1.0}) {
      c.nu = nu;
      c.alpha = 0.3;
      CHECK(reg_weight(own, 11, c) == doctest::Approx(oracle::naive_reg(own, 11, c)).epsilon(1e-14));
    }
  }
}

TEST_CASE("config validation") {
  SolverConfig c;
  c.nu = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.nu = 0.0;
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.alpha = 0;
  c.d = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("init is seeded and scaled by sigma / sqrt(d)") {
  SolverConfig c;
  c.d = 16;
  c.sigma = 0.4;
  const auto a = init_factors(2000, FactorRole::kUser, c, 5u);
  const auto b = init_factors(2000, FactorRole::kUser, c, 5u);
  CHECK(a.values == b.values);
  const double var = a.values.squaredNorm() / static_cast<double>(a.values.size());
  CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.02));
  c.sigma = 0.0;
  CHECK(init_factors(3, FactorRole::kItem, c, 1u).values.isZero(0.0));
}

TEST_CASE("gramian matches the triple loop and is exactly symmetric") {
  const Matrix f = random_matrix(37, 6, 3);
  const Matrix g = gramian(f);
  CHECK(rel_err(g, oracle::naive_gram(f)) < 1e-13);
  CHECK(g == g.transpose());
}

TEST_CASE("solve_row one-dimensional example") {
  const Matrix y = Matrix::Constant(1, 1, 0.5);
  const std::vector<Index> obs{0};
  const Vector a = solve_row(y, obs, gramian(y), 0.2, 0.05, 0.0);
  CHECK(a(0) == doctest::Approx(1.4285714285714286).epsilon(1e-14));
}

TEST_CASE("solve_row agrees with the stacked least-squares oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Index d = 1 + trial % 6;
    const Index n = 5 + trial;
    const Matrix y = random_matrix(n, d, 1000 + trial, 0.7);
    std::vector<Index> obs;
    for (Index j = 0; j < n; ++j)
      if (rng() % 3 == 0) obs.push_back(j);
    const double alpha = (trial % 4) * 0.05;
    const double lambda = 0.01 + (trial % 5) * 0.1;
    const double rho = (trial % 3) * 0.7;
    const Vector h = random_matrix(d, 1, 2000 + trial).col(0);
    const std::vector<double> hv(h.data(), h.data() + d);
    const Vector got = solve_row(y, obs, gramian(y), alpha, lambda, rho, hv);
    const Vector want = oracle::stacked_lsq_row(y, obs, alpha, lambda, rho, h);
    CHECK((got - want).norm() / std::max(1.0, want.norm()) < 1e-6);

    // Normal-equation residual.
    Matrix sys = alpha * oracle::naive_gram(y) + (lambda + rho) * Matrix::Identity(d, d);
    Vector rhs = rho * h;
    for (Index j : obs) {
      sys += y.row(j).transpose() * y.row(j);
      rhs += y.row(j).transpose();
    }
    CHECK((sys * got - rhs).norm() / std::max(1.0, rhs.norm()) < 1e-9);
  }
}

TEST_CASE("solve_row rejects singular and non-finite systems") {
  const Matrix y = random_matrix(4, 3, 1);
  const std::vector<Index> none;
  CHECK_THROWS_AS(solve_row(y, none, gramian(y), 0.0, 0.0, 0.0), NumericError);
  Matrix bad = y;
  bad(2, 1) = std::nan("");
  const std::vector<Index> obs{2};
  CHECK_THROWS_AS(solve_row(bad, obs, gramian(y), 0.0, 0.1, 0.0), NumericError);
}

TEST_CASE("local_objective matches the dense pairwise sum") {
  const auto data = small_domain(3);
  REQUIRE(data.shared_rows.size() == 6);
  for (int variant = 0; variant < 6; ++variant) {
    SolverConfig c;
    c.d = 3;
    c.alpha = 0.1 * (variant % 3);
    c.lambda = 0.05;
    c.nu = variant % 2 ? 0.5 : 0.0;
    c.rho_on_private_users = variant % 2 == 0;
    c.rho_on_items = variant < 3;
    const auto m = init_model(data.n_users(), data.n_items(), [&] { auto k = c; k.sigma = 2.0; return k; }(), 9 + variant);
    FactorModel model = m;
    model.config = c;
    const Matrix target = random_matrix(6, 3, 50 + variant);
    for (double rho : {0.0, 0.8}) {
      const Penalty p{rho, variant < 4 ? &target : nullptr};
      const double want = oracle::naive_objective(model.users.values, model.items.values, data, c, rho, p.target);
      CHECK(local_objective(model, data, p) == doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("half-sweeps land on stationary points of the objective") {
  const auto data = small_domain(4);
  SolverConfig c;
  c.d = 3;
  c.alpha = 0.05;
  c.lambda = 0.1;
  c.nu = 0.5;
  c.sigma = 1.0;
  FactorModel model = init_model(data.n_users(), data.n_items(), c, 2);
  const Matrix target = random_matrix(6, 3, 8);
  const Penalty p{0.6, &target};

  model.users.values = update_users(model, data, p, 1);
  const auto fx = [&](const Matrix& x) {
    FactorModel m = model;
    m.users.values = x;
    return local_objective(m, data, p);
  };
  CHECK(oracle::fd_gradient(fx, model.users.values).cwiseAbs().maxCoeff() < 1e-6);

  model.items.values = update_items(model, data, p.rho, 1);
  const auto fy = [&](const Matrix& y) {
    FactorModel m = model;
    m.items.values = y;
    return local_objective(m, data, p);
  };
  CHECK(oracle::fd_gradient(fy, model.items.values).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("alternating sweeps never increase the objective") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto data = small_domain(seed);
    SolverConfig c;
    c.d = 4;
    c.alpha = 0.02 * static_cast<double>(seed % 3);
    c.lambda = 0.01 + 0.05 * static_cast<double>(seed % 2);
    c.nu = seed % 2 ? 1.0 : 0.0;
    c.sigma = 0.5;
    FactorModel model = init_model(data.n_users(), data.n_items(), c, seed);
    const Matrix target = random_matrix(6, 4, seed);
    const Penalty p{seed % 2 ? 0.3 : 0.0, &target};
    double prev = local_objective(model, data, p);
    for (int epoch = 0; epoch < 15; ++epoch) {
      model.users.values = update_users(model, data, p, 1);
      double now = local_objective(model, data, p);
      CHECK(now <= prev * (1 + 1e-12) + 1e-12);
      prev = now;
      model.items.values = update_items(model, data, p.rho, 1);
      now = local_objective(model, data, p);
      CHECK(now <= prev * (1 + 1e-12) + 1e-12);
      prev = now;
    }
  }
}

TEST_CASE("row updates do not depend on the thread count") {
  SyntheticSpec spec;
  spec.n_shared_users = 300;
  spec.n_items = 120;
  const auto logs = make_synthetic_logs(spec);
  const auto data = build_dataset(logs[0], {});
  SolverConfig c;
  c.d = 8;
  c.alpha = 0.01;
  c.lambda = 0.1;
  const auto one = train_als(data, c, 3, 7, {}, 1);
  const auto four = train_als(data, c, 3, 7, {}, 4);
  CHECK(one.users.values == four.users.values);
  CHECK(one.items.values == four.items.values);
}

TEST_CASE("train_als reports each half-sweep") {
  const auto data = small_domain(2);
  SolverConfig c;
  c.d = 2;
  c.lambda = 0.1;
  std::vector<std::pair<int, HalfSweep>> seen;
  train_als(data, c, 2, 1, [&](int e, HalfSweep s, const FactorModel&) { seen.emplace_back(e, s); });
  REQUIRE(seen.size() == 4);
  CHECK(seen[0] == std::pair{1, HalfSweep::kUsers});
  CHECK(seen[3] == std::pair{2, HalfSweep::kItems});
}

TEST_CASE("empty data produces empty factors") {
  const auto data = build_dataset(InteractionLog{}, {});
  SolverConfig c;
  c.d = 4;
  c.lambda = 0.1;
  const auto m = train_als(data, c, 2, 1);
  CHECK(m.users.rows() == 0);
  CHECK(m.items.rows() == 0);
}

TEST_CASE("factor files") {
  const auto dir = std::filesystem::temp_directory_path() / "cdimf_test_factors";
  std::filesystem::create_directories(dir);
  FactorMatrix f{random_matrix(7, 3, 4), FactorRole::kItem};
  f.values(0, 0) = -0.0;
  f.values(1, 1) = 1e-310;

  const auto bytes = encode_factors(f);
  REQUIRE(bytes.size() == 25 + 7 * 3 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CDMF");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 7);
  CHECK(bytes[17] == 3);

  save_factors(dir / "f.cdmf", f);
  CHECK(read_all(dir / "f.cdmf") == bytes);
  const auto back = load_factors(dir / "f.cdmf");
  CHECK(back.role == FactorRole::kItem);
  CHECK(std::memcmp(back.values.data(), f.values.data(), 21 * sizeof(double)) == 0);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_factors(truncated), DataError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_factors(magic), DataError);
  CHECK_THROWS_AS(load_factors(dir / "missing.cdmf"), DataError);

  f.values(3, 2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(save_factors(dir / "bad.cdmf", f), DivergenceError);
  CHECK_FALSE(std::filesystem::exists(dir / "bad.cdmf"));
  std::filesystem::remove_all(dir);
}
