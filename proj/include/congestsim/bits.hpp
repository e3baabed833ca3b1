#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace congestsim {

inline constexpr std::uint64_t div_ceil(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

/// Smallest w with 2^w >= x (x >= 1).
inline constexpr int ceil_log2(std::uint64_t x) {
  int w = 0;
  std::uint64_t p = 1;
  while (p < x) {
    p <<= 1;
    ++w;
  }
  return w;
}

/// Bits needed to encode any value in [0, range). At least 1.
inline constexpr int value_bits(std::uint64_t range) {
  return range <= 2 ? 1 : ceil_log2(range);
}

/// Bits of a vertex ID in an n-vertex graph.
inline constexpr int id_bits(int n) { return value_bits(static_cast<std::uint64_t>(n)); }

/// Iterated logarithm: applications of log2 until the value drops to <= 2.
inline int log_star(double n) {
  int s = 0;
  double v = n;
  while (v > 2.0) {
    v = std::log2(v);
    ++s;
  }
  return s;
}

/// Exact bit string with explicit length; payload unit of every message.
class BitString {
 public:
  BitString() = default;

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool bit(std::size_t i) const { return bits_[i]; }

  void push_back(bool b) { bits_.push_back(b); }

  /// Append `width` bits of `v`, LSB first.
  void append_uint(std::uint64_t v, int width) {
    assert(width >= 0 && width <= 64);
    assert(width == 64 || v < (std::uint64_t{1} << width));
    for (int i = 0; i < width; ++i) bits_.push_back((v >> i) & 1);
  }

  void append(const BitString& other) {
    bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
  }

  /// Bits [from, from+len) as a new string; clamps at the end.
  BitString slice(std::size_t from, std::size_t len) const {
    BitString out;
    for (std::size_t i = from; i < bits_.size() && i < from + len; ++i)
      out.bits_.push_back(bits_[i]);
    return out;
  }

  bool operator==(const BitString& other) const { return bits_ == other.bits_; }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (bool b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }

 private:
  std::vector<bool> bits_;
};

/// Sequential reader over a BitString.
class BitReader {
 public:
  explicit BitReader(const BitString& s) : s_(&s) {}

  std::uint64_t read_uint(int width) {
    if (pos_ + static_cast<std::size_t>(width) > s_->size())
      throw std::runtime_error("BitReader: read past end");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      if (s_->bit(pos_++)) v |= std::uint64_t{1} << i;
    return v;
  }

  bool read_bit() { return read_uint(1) != 0; }
  std::size_t remaining() const { return s_->size() - pos_; }
  bool done() const { return pos_ == s_->size(); }

 private:
  const BitString* s_;
  std::size_t pos_ = 0;
};

inline BitString enc_value(std::uint64_t v, int width) {
  BitString b;
  b.append_uint(v, width);
  return b;
}

}  // namespace congestsim
