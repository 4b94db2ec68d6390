#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ariann {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Mask selecting the low n_bits of a 64-bit word.
constexpr std::uint64_t ring_mask(int n_bits) {
  return n_bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_bits) - 1;
}

// Two's-complement reading of an n-bit ring element.
constexpr std::int64_t to_signed(std::uint64_t v, int n_bits) {
  if (n_bits >= 64) return static_cast<std::int64_t>(v);
  const std::uint64_t sign = std::uint64_t{1} << (n_bits - 1);
  v &= ring_mask(n_bits);
  return (v & sign) ? static_cast<std::int64_t>(v | ~ring_mask(n_bits))
                    : static_cast<std::int64_t>(v);
}

constexpr std::uint64_t from_signed(std::int64_t v, int n_bits) {
  return static_cast<std::uint64_t>(v) & ring_mask(n_bits);
}

void check_ring_bits(int n_bits);

/// Shaped tensor of elements of Z_{2^n}.
///
/// Elements are stored as 64-bit words whatever n is, and every mutating
/// operation re-applies the mask so that all stored words stay below 2^n.
class RingTensor {
 public:
  RingTensor() = default;
  RingTensor(Shape shape, int n_bits);
  // Throws if any element is >= 2^n_bits or the element count disagrees
  // with the shape.
  RingTensor(Shape shape, int n_bits, std::vector<std::uint64_t> data);

  static RingTensor scalar(std::uint64_t v, int n_bits);
  static RingTensor from_signed(Shape shape, int n_bits,
                                std::span<const std::int64_t> values);
  // Reduces arbitrary words mod 2^n instead of rejecting them.
  static RingTensor wrap(Shape shape, int n_bits,
                         std::vector<std::uint64_t> data);

  const Shape& shape() const { return shape_; }
  int n_bits() const { return n_bits_; }
  std::uint64_t mask() const { return ring_mask(n_bits_); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const std::uint64_t> data() const { return data_; }
  const std::vector<std::uint64_t>& values() const { return data_; }
  std::uint64_t operator[](std::size_t i) const { return data_[i]; }
  void set(std::size_t i, std::uint64_t v) { data_[i] = v & mask(); }

  // Same elements, new shape of equal size.
  RingTensor reshaped(Shape shape) const;
  // Same values reduced into a (possibly) smaller ring.
  RingTensor reduced(int n_bits) const;

  std::vector<std::int64_t> signed_values() const;

  bool operator==(const RingTensor& other) const = default;

 private:
  Shape shape_;
  int n_bits_ = 64;
  std::vector<std::uint64_t> data_;
};

enum class RingOp { kAdd, kSub, kMul, kNeg };

// Elementwise arithmetic mod 2^n. `b` may be a one-element tensor, which is
// broadcast; it is ignored (and may be null) for kNeg.
RingTensor ring_arith(RingOp op, const RingTensor& a, const RingTensor* b);

RingTensor operator+(const RingTensor& a, const RingTensor& b);
RingTensor operator-(const RingTensor& a, const RingTensor& b);
RingTensor operator*(const RingTensor& a, const RingTensor& b);
RingTensor operator-(const RingTensor& a);

// Bit planes b_1..b_n with b_1 the most significant bit.
std::vector<RingTensor> bit_decompose(const RingTensor& a);
RingTensor recompose_bits(std::span<const RingTensor> bits, int n_bits);

std::vector<std::int64_t> signed_value(const RingTensor& a);

// Bit i (1-based, MSB first) of an n-bit value.
constexpr int bit_at(std::uint64_t v, int i, int n_bits) {
  return static_cast<int>((v >> (n_bits - i)) & 1U);
}

}  // namespace ariann
