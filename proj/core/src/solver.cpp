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
#include "cdimf/solver.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>

#ifdef CDIMF_HAVE_OPENMP
#include <omp.h>
#endif

#include "byte_io.hpp"
#include "cdimf/error.hpp"

namespace cdimf {
namespace {

constexpr char kFactorMagic[4] = {'C', 'D', 'M', 'F'};
constexpr std::uint32_t kFactorVersion = 1;

int resolve_threads(int threads) {
#ifdef CDIMF_HAVE_OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

// Runs body(row) for row in [0, n) and rethrows the first failure.
template <class Body>
void for_each_row(Index n, int threads, Body&& body) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  [[maybe_unused]] const int nt = resolve_threads(threads);
#ifdef CDIMF_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 32) num_threads(nt)
#endif
  for (Index row = 0; row < n; ++row) {
    try {
      body(row);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<Index> shared_positions(const DomainDataset& data) {
  std::vector<Index> pos(static_cast<std::size_t>(data.n_users()), -1);
  for (std::size_t k = 0; k < data.shared_rows.size(); ++k) {
    pos[static_cast<std::size_t>(data.shared_rows[k])] = static_cast<Index>(k);
  }
  return pos;
}

void check_target(const Penalty& penalty, const DomainDataset& data, Index d) {
  if (penalty.target == nullptr) return;
  const auto s = static_cast<Index>(data.shared_rows.size());
  if (penalty.target->rows() != s || (s > 0 && penalty.target->cols() != d)) {
    throw ConfigError("penalty target must be " + std::to_string(s) + " x " + std::to_string(d) +
                      ", got " + std::to_string(penalty.target->rows()) + " x " +
                      std::to_string(penalty.target->cols()));
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (d < 1) throw ConfigError("solver: d must be >= 1");
  if (!(alpha >= 0.0) || !(lambda >= 0.0) || !(sigma >= 0.0)) {
    throw ConfigError("solver: alpha, lambda and sigma must be >= 0");
  }
  if (!(nu >= 0.0 && nu <= 1.0)) throw ConfigError("solver: nu must lie in [0, 1]");
}

FactorMatrix init_factors(Index n, FactorRole role, const SolverConfig& config,
                          std::mt19937_64& rng) {
  FactorMatrix f{Matrix::Zero(n, config.d), role};
  const double stddev = config.sigma / std::sqrt(static_cast<double>(config.d));
  if (stddev == 0.0) return f;
  std::normal_distribution<double> normal(0.0, stddev);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < config.d; ++c) f.values(r, c) = normal(rng);
  }
  return f;
}

FactorMatrix init_factors(Index n, FactorRole role, const SolverConfig& config,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_factors(n, role, config, rng);
}

FactorModel init_model(Index n_users, Index n_items, const SolverConfig& config,
                       std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  FactorModel model;
  model.config = config;
  model.users = init_factors(n_users, FactorRole::kUser, config, rng);
  model.items = init_factors(n_items, FactorRole::kItem, config, rng);
  return model;
}

double reg_weight(Index own_count, Index opposite_catalog, const SolverConfig& config) {
  if (config.nu == 0.0) return config.lambda;
  const double base =
      static_cast<double>(own_count) + config.alpha * static_cast<double>(opposite_catalog);
  return config.lambda * std::pow(base, config.nu);
}

Matrix gramian(const Matrix& factors) {
  Matrix g = factors.transpose() * factors;
  // Exact symmetry regardless of the product kernel's summation order.
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = r + 1; c < g.cols(); ++c) g(c, r) = g(r, c);
  }
  return g;
}

Vector solve_row(const Matrix& opposite, std::span<const Index> observed, const Matrix& gram,
                 double alpha, double lambda_row, double rho_eff, std::span<const double> target) {
  const Index d = gram.rows();
  if (gram.cols() != d || opposite.cols() != d) throw ConfigError("solve_row: dimension mismatch");
  if (!std::isfinite(alpha) || !std::isfinite(lambda_row) || !std::isfinite(rho_eff) ||
      !gram.allFinite()) {
    throw NumericError("solve_row: non-finite coefficients");
  }
  Eigen::MatrixXd system = alpha * gram;
  system.diagonal().array() += lambda_row + rho_eff;
  Vector rhs = Vector::Zero(d);
  for (const Index j : observed) {
    const auto y = opposite.row(j);
    if (!y.allFinite()) throw NumericError("solve_row: non-finite factor in row " + std::to_string(j));
    system.noalias() += y.transpose() * y;
    rhs += y.transpose();
  }
  if (rho_eff != 0.0 && !target.empty()) {
    if (static_cast<Index>(target.size()) != d) throw ConfigError("solve_row: target has wrong size");
    const Eigen::Map<const Vector> h(target.data(), d);
    if (!h.allFinite()) throw NumericError("solve_row: non-finite target");
    rhs += rho_eff * h;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericError(
        "solve_row: system is not positive definite; use lambda > 0 or rho > 0 to regularize");
  }
  return llt.solve(rhs);
}

Matrix update_users(const FactorModel& model, const DomainDataset& data, const Penalty& penalty,
                    int threads) {
  const auto& cfg = model.config;
  const Matrix& items = model.items.values;
  check_target(penalty, data, cfg.d);
  const Matrix gram = gramian(items);
  const auto shared_pos = shared_positions(data);
  Matrix out(data.n_users(), cfg.d);
  for_each_row(data.n_users(), threads, [&](Index u) {
    const auto observed = data.items_of(u);
    const double lambda_row = reg_weight(static_cast<Index>(observed.size()), data.n_items(), cfg);
    const Index pos = shared_pos[static_cast<std::size_t>(u)];
    double rho_eff = 0.0;
    std::span<const double> target;
    if (pos >= 0) {
      rho_eff = penalty.rho;
      if (penalty.target != nullptr) {
        target = {penalty.target->row(pos).data(), static_cast<std::size_t>(cfg.d)};
      }
    } else if (cfg.rho_on_private_users) {
      rho_eff = penalty.rho;
    }
    out.row(u) = solve_row(items, observed, gram, cfg.alpha, lambda_row, rho_eff, target).transpose();
  });
  return out;
}

Matrix update_items(const FactorModel& model, const DomainDataset& data, double rho, int threads) {
  const auto& cfg = model.config;
  const Matrix& users = model.users.values;
  const Matrix gram = gramian(users);
  const double rho_eff = cfg.rho_on_items ? rho : 0.0;
  Matrix out(data.n_items(), cfg.d);
  for_each_row(data.n_items(), threads, [&](Index i) {
    const auto observed = data.users_of(i);
    const double lambda_row = reg_weight(static_cast<Index>(observed.size()), data.n_users(), cfg);
    out.row(i) = solve_row(users, observed, gram, cfg.alpha, lambda_row, rho_eff).transpose();
  });
  return out;
}

double local_objective(const FactorModel& model, const DomainDataset& data, const Penalty& penalty) {
  const auto& cfg = model.config;
  const Matrix& x = model.users.values;
  const Matrix& y = model.items.values;
  check_target(penalty, data, cfg.d);

  double observed_loss = 0.0;
  double reg = 0.0;
  for (Index u = 0; u < data.n_users(); ++u) {
    const auto items = data.items_of(u);
    for (const Index i : items) {
      const double e = x.row(u).dot(y.row(i)) - 1.0;
      observed_loss += e * e;
    }
    reg += reg_weight(static_cast<Index>(items.size()), data.n_items(), cfg) * x.row(u).squaredNorm();
  }
  for (Index i = 0; i < data.n_items(); ++i) {
    reg += reg_weight(static_cast<Index>(data.users_of(i).size()), data.n_users(), cfg) *
           y.row(i).squaredNorm();
  }
  const double all_pairs = cfg.alpha * gramian(x).cwiseProduct(gramian(y)).sum();

  double pull = 0.0;
  if (penalty.rho != 0.0) {
    const auto shared_pos = shared_positions(data);
    for (Index u = 0; u < data.n_users(); ++u) {
      const Index pos = shared_pos[static_cast<std::size_t>(u)];
      if (pos >= 0) {
        pull += penalty.target != nullptr ? (x.row(u) - penalty.target->row(pos)).squaredNorm()
                                          : x.row(u).squaredNorm();
      } else if (cfg.rho_on_private_users) {
        pull += x.row(u).squaredNorm();
      }
    }
    if (cfg.rho_on_items) pull += y.squaredNorm();
  }
  return 0.5 * (observed_loss + all_pairs + reg) + 0.5 * penalty.rho * pull;
}

FactorModel train_als(const DomainDataset& data, const SolverConfig& config, int epochs,
                      std::uint64_t seed, const SweepObserver& observer, int threads) {
  FactorModel model = init_model(data.n_users(), data.n_items(), config, seed);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    model.users.values = update_users(model, data, Penalty{}, threads);
    if (observer) observer(epoch, HalfSweep::kUsers, model);
    model.items.values = update_items(model, data, 0.0, threads);
    if (observer) observer(epoch, HalfSweep::kItems, model);
  }
  return model;
}

std::vector<std::uint8_t> encode_factors(const FactorMatrix& factors) {
  std::vector<std::uint8_t> out;
  out.reserve(25 + static_cast<std::size_t>(factors.values.size()) * 8);
  detail::ByteWriter w(out);
  w.bytes(kFactorMagic, 4);
  w.put(kFactorVersion);
  w.put(static_cast<std::uint8_t>(factors.role));
  w.put(static_cast<std::uint64_t>(factors.rows()));
  w.put(static_cast<std::uint64_t>(factors.dim()));
  const double* p = factors.values.data();
  for (Index k = 0; k < factors.values.size(); ++k) w.f64(p[k]);
  return out;
}

FactorMatrix decode_factors(std::span<const std::uint8_t> bytes) {
  detail::ByteReader<DataError> r(bytes, "factor file");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kFactorMagic)) throw DataError("factor file: bad magic");
  if (r.get<std::uint32_t>() != kFactorVersion) throw DataError("factor file: unsupported version");
  const auto role = r.get<std::uint8_t>();
  if (role > 1) throw DataError("factor file: bad role byte");
  const auto n = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  if (d != 0 && n > r.remaining() / 8 / d) throw DataError("factor file: truncated input");
  if (r.remaining() != n * d * 8) throw DataError("factor file: payload size mismatch");
  FactorMatrix f{Matrix(static_cast<Index>(n), static_cast<Index>(d)), static_cast<FactorRole>(role)};
  double* p = f.values.data();
  for (std::uint64_t k = 0; k < n * d; ++k) p[k] = r.f64();
  return f;
}

void save_factors(const std::filesystem::path& path, const FactorMatrix& factors) {
  if (!factors.all_finite()) {
    throw DivergenceError("refusing to write non-finite factors to " + path.string());
  }
  const auto bytes = encode_factors(factors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FactorMatrix load_factors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return decode_factors(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace cdimf
