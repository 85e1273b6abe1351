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

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdimf/consensus.hpp"
#include "cdimf/dataio.hpp"
#include "cdimf/solver.hpp"
#include "cdimf/types.hpp"

namespace cdimf {

/// SHA-256 of the newline-joined sorted shared user ids.
using Digest = std::array<std::uint8_t, 32>;

Digest alignment_digest(std::span<const std::string> sorted_ids);
std::string to_hex(const Digest& digest);

namespace wire {

inline constexpr char kMagic[4] = {'C', 'D', 'F', 'W'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;

enum class MessageType : std::uint8_t { kHello = 1, kShare = 2, kGlobal = 3, kBye = 4, kError = 5 };

/// Registration; the aggregator echoes it back to accept the worker.
struct HelloMessage {
  std::uint32_t domain_id = 0;
  std::uint64_t n_shared = 0;
  std::uint64_t dim = 0;
  Digest digest{};

  bool operator==(const HelloMessage&) const = default;
};

/// X_i + U_i on the shared rows, row-major.
struct ShareMessage {
  std::uint64_t round = 0;
  std::uint32_t domain_id = 0;
  std::uint64_t row_count = 0;
  std::uint64_t dim = 0;
  Digest digest{};
  std::vector<double> payload;

  bool operator==(const ShareMessage&) const = default;
};

/// Z for one round, row-major.
struct GlobalMessage {
  std::uint64_t round = 0;
  std::uint64_t row_count = 0;
  std::uint64_t dim = 0;
  std::vector<double> payload;

  bool operator==(const GlobalMessage&) const = default;
};

struct ErrorMessage {
  std::uint32_t code = 0;
  std::string message;
};

struct Frame {
  MessageType type = MessageType::kBye;
  std::vector<std::uint8_t> body;
};

/// Header: magic "CDFW", u16 version, u8 type, u8 reserved, u64 body length,
/// all little-endian, followed by the body.
std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> body);

/// Parses one complete frame; throws ProtocolError on bad magic, version,
/// type, or a length that disagrees with the buffer.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Validates a 16-byte header and returns (type, body length).
std::pair<MessageType, std::uint64_t> decode_header(std::span<const std::uint8_t> header);

std::vector<std::uint8_t> encode_hello(const HelloMessage& msg);
std::vector<std::uint8_t> encode_share(const ShareMessage& msg);
std::vector<std::uint8_t> encode_global(const GlobalMessage& msg);
std::vector<std::uint8_t> encode_bye();
std::vector<std::uint8_t> encode_error(const ErrorMessage& msg);

HelloMessage decode_hello(const Frame& frame);
ShareMessage decode_share(const Frame& frame);
GlobalMessage decode_global(const Frame& frame);
ErrorMessage decode_error(const Frame& frame);

/// Full-frame convenience overloads.
ShareMessage decode_share(std::span<const std::uint8_t> bytes);
GlobalMessage decode_global(std::span<const std::uint8_t> bytes);

Matrix to_matrix(std::uint64_t rows, std::uint64_t cols, const std::vector<double>& payload);
std::vector<double> to_payload(const Matrix& m);

}  // namespace wire

enum class TapDirection { kReceived, kSent };

/// Observes every byte a session endpoint sends or receives.
using WireTap = std::function<void(TapDirection, std::span<const std::uint8_t>)>;

/// "host:port"; falls back to the CDIMF_AGGREGATOR environment variable when
/// \p flag is empty. Throws ConfigError if neither is set.
std::string resolve_aggregator_address(std::string_view flag);

struct AggregatorOptions {
  /// "host:port"; port 0 picks a free port (see Aggregator::port()).
  std::string listen_address = "127.0.0.1:0";
  std::chrono::milliseconds timeout{std::chrono::minutes(5)};
  WireTap tap;
};

struct SessionResult {
  int rounds_completed = 0;
  Matrix z;
  Digest digest{};
};

/// Star-topology hub: collects N shares per round in strict lockstep,
/// aggregates them, and broadcasts Z. Holds no interaction data.
class Aggregator {
 public:
  Aggregator(const ConsensusConfig& config, AggregatorOptions options);
  ~Aggregator();
  Aggregator(const Aggregator&) = delete;
  Aggregator& operator=(const Aggregator&) = delete;

  std::uint16_t port() const;

  /// Blocks until the session ends. Throws ProtocolError on digest or shape
  /// mismatch, duplicate domain ids, out-of-step rounds, disconnects and
  /// timeouts, after notifying the workers with an ERROR frame.
  SessionResult run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct WorkerOptions {
  std::string aggregator_address;
  std::uint32_t domain_id = 0;
  std::chrono::milliseconds timeout{std::chrono::minutes(5)};
  /// Where to write the local state if the session breaks.
  std::optional<std::filesystem::path> checkpoint_dir;
  int threads = 0;
  WireTap tap;
};

struct WorkerResult {
  FactorModel model;
  Matrix dual;
  Matrix z;
  int rounds_completed = 0;
};

/// One domain's loop: register, then per round run aggregation_period local
/// epochs, send X + U, receive Z and update the dual. With rho = 0 the worker
/// only registers and says goodbye. \p seed initializes the factors (use
/// domain_seed() to match in-process training).
WorkerResult run_worker(const WorkerOptions& options, const DomainDataset& data,
                        const SolverConfig& solver, const ConsensusConfig& consensus,
                        std::uint64_t seed);

/// Written by run_worker when the session breaks: users/items/dual/z factor
/// files plus a "round" text file.
struct Checkpoint {
  FactorModel model;
  Matrix dual;
  Matrix z;
  int round = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace cdimf
