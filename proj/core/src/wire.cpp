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
#include <algorithm>
#include <cstdlib>
#include <limits>

#include <openssl/sha.h>

#include "byte_io.hpp"
#include "cdimf/error.hpp"
#include "cdimf/federation.hpp"

namespace cdimf {

Digest alignment_digest(std::span<const std::string> sorted_ids) {
  std::string joined;
  for (std::size_t k = 0; k < sorted_ids.size(); ++k) {
    if (k > 0) joined.push_back('\n');
    joined += sorted_ids[k];
  }
  Digest digest{};
  SHA256(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest.data());
  return digest;
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (const auto b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string resolve_aggregator_address(std::string_view flag) {
  if (!flag.empty()) return std::string(flag);
  if (const char* env = std::getenv("CDIMF_AGGREGATOR"); env != nullptr && *env != '\0') return env;
  throw ConfigError("no aggregator address: pass --aggregator or set CDIMF_AGGREGATOR");
}

namespace wire {
namespace {

using Reader = detail::ByteReader<ProtocolError>;

// Frames larger than this are rejected before allocating.
constexpr std::uint64_t kMaxBody = std::uint64_t{1} << 34;

void expect_type(const Frame& frame, MessageType type, const char* name) {
  if (frame.type != type) {
    throw ProtocolError(std::string("expected ") + name + " frame, got type " +
                        std::to_string(static_cast<int>(frame.type)));
  }
}

std::vector<double> read_payload(Reader& r, std::uint64_t rows, std::uint64_t cols) {
  if (cols != 0 && rows > r.remaining() / 8 / cols) throw ProtocolError("payload: truncated input");
  const std::uint64_t count = rows * cols;
  if (r.remaining() != count * 8) throw ProtocolError("payload length does not match row_count * dim");
  std::vector<double> payload(count);
  for (auto& v : payload) v = r.f64();
  return payload;
}

void check_payload(std::uint64_t rows, std::uint64_t cols, const std::vector<double>& payload) {
  if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / cols) {
    throw ProtocolError("payload size overflow");
  }
  if (payload.size() != rows * cols) throw ProtocolError("payload length does not match row_count * dim");
}

}  // namespace

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> body) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + body.size());
  detail::ByteWriter w(out);
  w.bytes(kMagic, 4);
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(type));
  w.put(std::uint8_t{0});
  w.put(static_cast<std::uint64_t>(body.size()));
  w.bytes(body.data(), body.size());
  return out;
}

std::pair<MessageType, std::uint64_t> decode_header(std::span<const std::uint8_t> header) {
  Reader r(header, "frame header");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw ProtocolError("bad frame magic");
  if (const auto version = r.get<std::uint16_t>(); version != kVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(version));
  }
  const auto type = r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  const auto body_len = r.get<std::uint64_t>();
  if (type < 1 || type > 5) throw ProtocolError("unknown message type " + std::to_string(type));
  if (body_len > kMaxBody) throw ProtocolError("frame body too large");
  return {static_cast<MessageType>(type), body_len};
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ProtocolError("frame header: truncated input");
  const auto [type, body_len] = decode_header(bytes.first(kHeaderSize));
  if (bytes.size() - kHeaderSize != body_len) {
    throw ProtocolError("frame: body length " + std::to_string(body_len) + " but " +
                        std::to_string(bytes.size() - kHeaderSize) + " bytes present");
  }
  return {type, std::vector<std::uint8_t>(bytes.begin() + kHeaderSize, bytes.end())};
}

std::vector<std::uint8_t> encode_hello(const HelloMessage& msg) {
  std::vector<std::uint8_t> body;
  detail::ByteWriter w(body);
  w.put(msg.domain_id);
  w.put(msg.n_shared);
  w.put(msg.dim);
  w.bytes(msg.digest.data(), msg.digest.size());
  return encode_frame(MessageType::kHello, body);
}

std::vector<std::uint8_t> encode_share(const ShareMessage& msg) {
  check_payload(msg.row_count, msg.dim, msg.payload);
  std::vector<std::uint8_t> body;
  body.reserve(60 + msg.payload.size() * 8);
  detail::ByteWriter w(body);
  w.put(msg.round);
  w.put(msg.domain_id);
  w.put(msg.row_count);
  w.put(msg.dim);
  w.bytes(msg.digest.data(), msg.digest.size());
  for (const double v : msg.payload) w.f64(v);
  return encode_frame(MessageType::kShare, body);
}

std::vector<std::uint8_t> encode_global(const GlobalMessage& msg) {
  check_payload(msg.row_count, msg.dim, msg.payload);
  std::vector<std::uint8_t> body;
  body.reserve(24 + msg.payload.size() * 8);
  detail::ByteWriter w(body);
  w.put(msg.round);
  w.put(msg.row_count);
  w.put(msg.dim);
  for (const double v : msg.payload) w.f64(v);
  return encode_frame(MessageType::kGlobal, body);
}

std::vector<std::uint8_t> encode_bye() { return encode_frame(MessageType::kBye, {}); }

std::vector<std::uint8_t> encode_error(const ErrorMessage& msg) {
  std::vector<std::uint8_t> body;
  detail::ByteWriter w(body);
  w.put(msg.code);
  w.bytes(msg.message.data(), msg.message.size());
  return encode_frame(MessageType::kError, body);
}

HelloMessage decode_hello(const Frame& frame) {
  expect_type(frame, MessageType::kHello, "HELLO");
  Reader r(frame.body, "HELLO");
  HelloMessage msg;
  msg.domain_id = r.get<std::uint32_t>();
  msg.n_shared = r.get<std::uint64_t>();
  msg.dim = r.get<std::uint64_t>();
  r.bytes(msg.digest.data(), msg.digest.size());
  if (r.remaining() != 0) throw ProtocolError("HELLO: trailing bytes");
  return msg;
}

ShareMessage decode_share(const Frame& frame) {
  expect_type(frame, MessageType::kShare, "SHARE");
  Reader r(frame.body, "SHARE");
  ShareMessage msg;
  msg.round = r.get<std::uint64_t>();
  msg.domain_id = r.get<std::uint32_t>();
  msg.row_count = r.get<std::uint64_t>();
  msg.dim = r.get<std::uint64_t>();
  r.bytes(msg.digest.data(), msg.digest.size());
  msg.payload = read_payload(r, msg.row_count, msg.dim);
  return msg;
}

GlobalMessage decode_global(const Frame& frame) {
  expect_type(frame, MessageType::kGlobal, "GLOBAL");
  Reader r(frame.body, "GLOBAL");
  GlobalMessage msg;
  msg.round = r.get<std::uint64_t>();
  msg.row_count = r.get<std::uint64_t>();
  msg.dim = r.get<std::uint64_t>();
  msg.payload = read_payload(r, msg.row_count, msg.dim);
  return msg;
}

ErrorMessage decode_error(const Frame& frame) {
  expect_type(frame, MessageType::kError, "ERROR");
  Reader r(frame.body, "ERROR");
  ErrorMessage msg;
  msg.code = r.get<std::uint32_t>();
  msg.message.assign(frame.body.begin() + 4, frame.body.end());
  return msg;
}

ShareMessage decode_share(std::span<const std::uint8_t> bytes) { return decode_share(decode_frame(bytes)); }

GlobalMessage decode_global(std::span<const std::uint8_t> bytes) {
  return decode_global(decode_frame(bytes));
}

Matrix to_matrix(std::uint64_t rows, std::uint64_t cols, const std::vector<double>& payload) {
  check_payload(rows, cols, payload);
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::copy(payload.begin(), payload.end(), m.data());
  return m;
}

std::vector<double> to_payload(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace wire
}  // namespace cdimf
