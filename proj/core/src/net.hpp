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

// Minimal blocking TCP transport for the federation protocol.

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdimf/federation.hpp"

namespace cdimf::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void set_timeout(std::chrono::milliseconds timeout);
  void set_tap(WireTap tap) { tap_ = std::move(tap); }

  void send_all(std::span<const std::uint8_t> bytes);
  void recv_exact(std::span<std::uint8_t> dest);

  /// Reads one whole frame (header and body).
  wire::Frame read_frame();
  /// Sends an already encoded frame.
  void write_frame(std::span<const std::uint8_t> frame) { send_all(frame); }

  void close();

 private:
  int fd_ = -1;
  WireTap tap_;
};

/// Splits "host:port"; throws ConfigError when malformed.
std::pair<std::string, std::uint16_t> split_address(std::string_view address);

class Listener {
 public:
  explicit Listener(std::string_view address);
  std::uint16_t port() const { return port_; }
  /// Throws ProtocolError when nothing connects within \p timeout.
  Socket accept(std::chrono::milliseconds timeout);

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

Socket connect(std::string_view address, std::chrono::milliseconds timeout);

}  // namespace cdimf::net
