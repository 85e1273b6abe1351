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
#include "net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

#include "cdimf/error.hpp"

namespace cdimf::net {

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_), tap_(std::move(other.tap_)) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    tap_ = std::move(other.tap_);
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::set_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
  if (tap_) tap_(TapDirection::kSent, bytes);
}

void Socket::recv_exact(std::span<std::uint8_t> dest) {
  std::size_t got = 0;
  while (got < dest.size()) {
    const ssize_t n = ::recv(fd_, dest.data() + got, dest.size() - got, 0);
    if (n == 0) throw ProtocolError("connection closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw ProtocolError("timed out waiting for peer");
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(n);
  }
  if (tap_) tap_(TapDirection::kReceived, dest);
}

wire::Frame Socket::read_frame() {
  std::uint8_t header[wire::kHeaderSize];
  recv_exact(header);
  const auto [type, body_len] = wire::decode_header(header);
  wire::Frame frame{type, std::vector<std::uint8_t>(body_len)};
  recv_exact(frame.body);
  return frame;
}

std::pair<std::string, std::uint16_t> split_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ConfigError("address must be host:port, got '" + std::string(address) + "'");
  }
  const auto port_text = address.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port > 65535) {
    throw ConfigError("bad port in address '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

namespace {

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
    throw ConfigError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  return result;
}

}  // namespace

Listener::Listener(std::string_view address) {
  const auto [host, port] = split_address(address);
  addrinfo* info = resolve(host, port, true);
  socket_ = Socket(::socket(info->ai_family, info->ai_socktype, info->ai_protocol));
  if (!socket_.valid()) {
    ::freeaddrinfo(info);
    throw ProtocolError(std::string("socket failed: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const int rc = ::bind(socket_.fd(), info->ai_addr, info->ai_addrlen);
  ::freeaddrinfo(info);
  if (rc != 0) throw ProtocolError("bind " + std::string(address) + " failed: " + std::strerror(errno));
  if (::listen(socket_.fd(), 16) != 0) throw ProtocolError(std::string("listen failed: ") + std::strerror(errno));
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Socket Listener::accept(std::chrono::milliseconds timeout) {
  pollfd pfd{socket_.fd(), POLLIN, 0};
  const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (ready == 0) throw ProtocolError("timed out waiting for workers to connect");
  if (ready < 0) throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
  Socket s(::accept(socket_.fd(), nullptr, nullptr));
  if (!s.valid()) throw ProtocolError(std::string("accept failed: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  s.set_timeout(timeout);
  return s;
}

Socket connect(std::string_view address, std::chrono::milliseconds timeout) {
  const auto [host, port] = split_address(address);
  // The aggregator may still be starting; retry refused connections briefly.
  const auto deadline = std::chrono::steady_clock::now() + std::min(timeout, std::chrono::milliseconds(10000));
  while (true) {
    addrinfo* info = resolve(host, port, false);
    Socket s(::socket(info->ai_family, info->ai_socktype, info->ai_protocol));
    const int rc = s.valid() ? ::connect(s.fd(), info->ai_addr, info->ai_addrlen) : -1;
    const int err = errno;
    ::freeaddrinfo(info);
    if (rc == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      s.set_timeout(timeout);
      return s;
    }
    if (err != ECONNREFUSED || std::chrono::steady_clock::now() >= deadline) {
      throw ProtocolError("cannot connect to " + std::string(address) + ": " + std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace cdimf::net
