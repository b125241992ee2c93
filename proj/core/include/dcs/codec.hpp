#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>

#include "dcs/types.hpp"

namespace dcs {

/// Little-endian append-only writer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void raw(ByteSpan data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void digest(const Digest& d) { raw(d); }
  void bytes(ByteSpan data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }

  const Bytes& data() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounds-checked little-endian reader; every underflow throws DecodeError.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    need(N);
    std::array<std::uint8_t, N> out;
    std::memcpy(out.data(), data_.data() + pos_, N);
    pos_ += N;
    return out;
  }
  Digest digest() { return fixed<32>(); }

  Bytes bytes(std::size_t max_len) {
    auto len = u32();
    if (len > max_len) throw DecodeError("length field exceeds limit");
    need(len);
    Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
              data_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return out;
  }

  /// Reads a count and rejects values that could not possibly fit in the
  /// remaining input at `min_item_size` bytes per item.
  std::size_t count(std::size_t min_item_size) {
    auto c = u32();
    if (min_item_size > 0 && c > remaining() / min_item_size) throw DecodeError("count exceeds input");
    return c;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw DecodeError("truncated input");
  }
  std::uint64_t get_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  ByteSpan data_;
  std::size_t pos_ = 0;
};

}  // namespace dcs
