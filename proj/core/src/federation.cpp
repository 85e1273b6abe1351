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
#include "cdimf/federation.hpp"

#include <algorithm>
#include <fstream>

#include "cdimf/error.hpp"
#include "net.hpp"

namespace cdimf {
namespace {

constexpr std::uint32_t kErrProtocol = 1;
constexpr std::uint32_t kErrDivergence = 2;

void notify_error(net::Socket& socket, std::uint32_t code, const std::string& message) noexcept {
  try {
    if (socket.valid()) socket.write_frame(wire::encode_error({code, message}));
  } catch (...) {
  }
}

[[noreturn]] void raise_peer_error(const wire::Frame& frame, const std::string& who) {
  const auto err = wire::decode_error(frame);
  throw ProtocolError(who + " reported error " + std::to_string(err.code) + ": " + err.message);
}

}  // namespace

struct Aggregator::Impl {
  ConsensusConfig config;
  AggregatorOptions options;
  net::Listener listener;

  Impl(const ConsensusConfig& c, AggregatorOptions o)
      : config(c), options(std::move(o)), listener(options.listen_address) {}
};

Aggregator::Aggregator(const ConsensusConfig& config, AggregatorOptions options) {
  config.validate();
  impl_ = std::make_unique<Impl>(config, std::move(options));
}

Aggregator::~Aggregator() = default;

std::uint16_t Aggregator::port() const { return impl_->listener.port(); }

SessionResult Aggregator::run() {
  const auto& config = impl_->config;
  const auto timeout = impl_->options.timeout;
  struct Peer {
    net::Socket socket;
    wire::HelloMessage hello;
  };
  std::vector<Peer> peers;
  SessionResult result;
  auto broadcast_error = [&](const std::string& message) {
    for (auto& peer : peers) notify_error(peer.socket, kErrProtocol, message);
  };

  try {
    for (int k = 0; k < config.n_domains; ++k) {
      net::Socket socket = impl_->listener.accept(timeout);
      socket.set_tap(impl_->options.tap);
      const auto frame = socket.read_frame();
      if (frame.type == wire::MessageType::kError) raise_peer_error(frame, "worker");
      const auto hello = wire::decode_hello(frame);
      std::string reject;
      for (const auto& peer : peers) {
        if (peer.hello.domain_id == hello.domain_id) {
          reject = "duplicate domain_id " + std::to_string(hello.domain_id);
        } else if (peer.hello.digest != hello.digest) {
          reject = "alignment digest mismatch (" + to_hex(hello.digest) + " vs " +
                   to_hex(peer.hello.digest) + ")";
        } else if (peer.hello.n_shared != hello.n_shared || peer.hello.dim != hello.dim) {
          reject = "shared-set shape mismatch";
        }
      }
      if (!reject.empty()) {
        notify_error(socket, kErrProtocol, reject);
        throw ProtocolError("session rejected: " + reject);
      }
      peers.push_back({std::move(socket), hello});
    }
    std::sort(peers.begin(), peers.end(),
              [](const Peer& a, const Peer& b) { return a.hello.domain_id < b.hello.domain_id; });
    for (auto& peer : peers) peer.socket.write_frame(wire::encode_hello(peer.hello));

    const auto& first = peers.front().hello;
    result.digest = first.digest;
    const auto rows = first.n_shared;
    const auto dim = first.dim;
    result.z = Matrix::Zero(static_cast<Index>(rows), static_cast<Index>(dim));
    const bool exchange = config.rho > 0.0 && rows > 0;

    for (int round = 1; exchange && round <= config.outer_rounds; ++round) {
      std::vector<Matrix> shares;
      shares.reserve(peers.size());
      for (auto& peer : peers) {
        const auto frame = peer.socket.read_frame();
        const std::string who = "domain " + std::to_string(peer.hello.domain_id);
        if (frame.type == wire::MessageType::kError) raise_peer_error(frame, who);
        const auto share = wire::decode_share(frame);
        if (share.round != static_cast<std::uint64_t>(round)) {
          throw ProtocolError(who + " sent round " + std::to_string(share.round) +
                              " while the aggregator is at round " + std::to_string(round));
        }
        if (share.domain_id != peer.hello.domain_id || share.digest != first.digest ||
            share.row_count != rows || share.dim != dim) {
          throw ProtocolError(who + " sent a share that does not match its registration");
        }
        shares.push_back(wire::to_matrix(share.row_count, share.dim, share.payload));
      }
      result.z = aggregate(shares, config);
      const auto frame = wire::encode_global(
          {static_cast<std::uint64_t>(round), rows, dim, wire::to_payload(result.z)});
      for (auto& peer : peers) peer.socket.write_frame(frame);
      result.rounds_completed = round;
    }
    for (auto& peer : peers) {
      const auto frame = peer.socket.read_frame();
      if (frame.type == wire::MessageType::kError) {
        raise_peer_error(frame, "domain " + std::to_string(peer.hello.domain_id));
      }
      if (frame.type != wire::MessageType::kBye) throw ProtocolError("expected BYE at end of session");
    }
  } catch (const Error& e) {
    broadcast_error(e.what());
    throw;
  }
  return result;
}

WorkerResult run_worker(const WorkerOptions& options, const DomainDataset& data,
                        const SolverConfig& solver, const ConsensusConfig& consensus,
                        std::uint64_t seed) {
  solver.validate();
  consensus.validate();
  const auto alignment = data.shared_user_ids();
  const wire::HelloMessage hello{options.domain_id, alignment.size(),
                                 static_cast<std::uint64_t>(solver.d), alignment_digest(alignment)};

  net::Socket socket = net::connect(options.aggregator_address, options.timeout);
  socket.set_tap(options.tap);
  socket.write_frame(wire::encode_hello(hello));
  const auto reply = socket.read_frame();
  if (reply.type == wire::MessageType::kError) raise_peer_error(reply, "aggregator");
  if (wire::decode_hello(reply) != hello) throw ProtocolError("aggregator did not accept registration");

  LocalDomain local(data, solver, seed, options.threads);
  const auto rows = static_cast<Index>(alignment.size());
  Matrix z = Matrix::Zero(rows, solver.d);
  const bool exchange = consensus.rho > 0.0 && rows > 0;
  int completed = 0;
  try {
    for (int round = 1; round <= consensus.outer_rounds; ++round) {
      for (int step = 0; step < consensus.aggregation_period; ++step) {
        if (!local.local_epoch(consensus.rho, exchange ? &z : nullptr)) {
          notify_error(socket, kErrDivergence, "non-finite factors in domain " +
                                                   std::to_string(options.domain_id));
          throw DivergenceError("local factors diverged in round " + std::to_string(round));
        }
      }
      if (exchange) {
        socket.write_frame(wire::encode_share({static_cast<std::uint64_t>(round), options.domain_id,
                                               static_cast<std::uint64_t>(rows),
                                               static_cast<std::uint64_t>(solver.d), hello.digest,
                                               wire::to_payload(local.share())}));
        const auto frame = socket.read_frame();
        if (frame.type == wire::MessageType::kError) raise_peer_error(frame, "aggregator");
        const auto global = wire::decode_global(frame);
        if (global.round != static_cast<std::uint64_t>(round) ||
            global.row_count != static_cast<std::uint64_t>(rows) ||
            global.dim != static_cast<std::uint64_t>(solver.d)) {
          throw ProtocolError("GLOBAL frame does not match round " + std::to_string(round));
        }
        z = wire::to_matrix(global.row_count, global.dim, global.payload);
        local.absorb_global(z);
      }
      completed = round;
    }
    socket.write_frame(wire::encode_bye());
  } catch (const ProtocolError&) {
    if (options.checkpoint_dir) {
      save_checkpoint(*options.checkpoint_dir, {local.model(), local.dual(), z, completed});
    }
    throw;
  }
  return {local.model(), local.dual(), z, completed};
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint) {
  std::filesystem::create_directories(dir);
  save_factors(dir / "users.cdmf", checkpoint.model.users);
  save_factors(dir / "items.cdmf", checkpoint.model.items);
  save_factors(dir / "dual.cdmf", {checkpoint.dual, FactorRole::kUser});
  save_factors(dir / "z.cdmf", {checkpoint.z, FactorRole::kUser});
  std::ofstream(dir / "round") << checkpoint.round << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint c;
  c.model.users = load_factors(dir / "users.cdmf");
  c.model.items = load_factors(dir / "items.cdmf");
  c.dual = load_factors(dir / "dual.cdmf").values;
  c.z = load_factors(dir / "z.cdmf").values;
  std::ifstream in(dir / "round");
  if (!(in >> c.round)) throw DataError("checkpoint: missing round in " + dir.string());
  return c;
}

}  // namespace cdimf
