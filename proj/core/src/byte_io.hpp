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

// Little-endian encoding helpers shared by the factor file and wire formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace cdimf::detail {

template <class T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <class T>
  void put(T value) {
    const T le = to_little(value);
    bytes(&le, sizeof(T));
  }
  void f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }

 private:
  std::vector<std::uint8_t>& out_;
};

/// Bounds-checked reader; throws Error(context + ": truncated") past the end.
template <class Error>
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context)
      : data_(data), context_(std::move(context)) {}

  void bytes(void* dest, std::size_t n) {
    need(n);
    std::memcpy(dest, data_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T value;
    bytes(&value, sizeof(T));
    return to_little(value);
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::size_t remaining() const { return data_.size() - pos_; }
  void need(std::size_t n) const {
    if (n > remaining()) throw Error(context_ + ": truncated input");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
};

}  // namespace cdimf::detail
