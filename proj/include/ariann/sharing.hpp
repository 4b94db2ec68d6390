#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ariann/prg.hpp"
#include "ariann/ring_tensor.hpp"

namespace ariann {

class Session;

// One party's additive share of a fixed-point tensor: the secret is
// (share_0 + share_1) mod 2^n, scaled by 10^precision.
class AdditiveShare {
 public:
  AdditiveShare() = default;
  AdditiveShare(int party, RingTensor values, int precision = 0);

  int party() const { return party_; }
  const RingTensor& values() const { return values_; }
  int precision() const { return precision_; }
  const Shape& shape() const { return values_.shape(); }
  int n_bits() const { return values_.n_bits(); }
  std::size_t size() const { return values_.size(); }

  AdditiveShare reshaped(Shape shape) const;
  AdditiveShare with_precision(int precision) const;

 private:
  int party_ = 0;
  RingTensor values_;
  int precision_ = 0;
};

// Throws std::invalid_argument unless party, shape, ring and precision agree.
void check_compatible(const AdditiveShare& a, const AdditiveShare& b);

// Local (zero-round) operations.
AdditiveShare operator+(const AdditiveShare& a, const AdditiveShare& b);
AdditiveShare operator-(const AdditiveShare& a, const AdditiveShare& b);
AdditiveShare operator-(const AdditiveShare& a);
// Party 0 adds the public value, party 1 keeps its share. `c` may be a
// one-element tensor; it must already carry the share's precision.
AdditiveShare add_public(const AdditiveShare& x, const RingTensor& c);
AdditiveShare sub_public(const AdditiveShare& x, const RingTensor& c);
// c - x
AdditiveShare public_minus(const RingTensor& c, const AdditiveShare& x);
// Elementwise product with a public tensor of precision c_precision.
AdditiveShare mul_public(const AdditiveShare& x, const RingTensor& c, int c_precision);
AdditiveShare scale(const AdditiveShare& x, std::int64_t k);
// Digits used to encode a public real constant c for a share at the given
// precision: about six significant digits when the ring is 64 bits wide,
// the share's own precision otherwise.
int constant_precision(double c, int n_bits, int precision);
// x * c for a public real c, same precision as x. Local.
AdditiveShare mul_public_scalar(const AdditiveShare& x, double c);
AdditiveShare div_public(const AdditiveShare& x, double d);
// Signed floor division of plaintext ring values by 10^digits.
RingTensor truncate_plain(const RingTensor& t, int digits);

// Share of a public value: party 0 holds it, party 1 holds zero.
AdditiveShare public_share(int party, const RingTensor& c, int precision);

// Divides the shared value by 10^digits without interaction. Each share is
// divided on its own, so the result is off by at most one unit, and is
// wrong with probability about |x| / 2^n.
AdditiveShare truncate(const AdditiveShare& x, int digits);

std::pair<AdditiveShare, AdditiveShare> share(const RingTensor& secret, Rng& rng,
                                              int precision = 0);
// Opens a secret held in the clear by the caller (test harness, data owner).
RingTensor reconstruct(const AdditiveShare& s0, const AdditiveShare& s1);
// Number of reconstruct() calls so far in this process.
std::uint64_t reconstruction_count();

std::int64_t pow10(int p);

// floor(v * 10^p) in two's complement. Throws std::range_error on overflow.
RingTensor encode_fixed(std::span<const double> v, Shape shape, int precision, int n_bits);
std::int64_t encode_fixed_scalar(double v, int precision, int n_bits);
std::vector<double> decode_fixed(const RingTensor& t, int precision);
double decode_fixed_scalar(std::uint64_t v, int precision, int n_bits);

// One round: each party publishes its share of y + alpha reduced mod
// 2^mask_bits, and both learn x = y + alpha mod 2^mask_bits.
std::vector<std::uint64_t> mask_and_reveal(Session& s, const AdditiveShare& y,
                                           std::span<const std::uint64_t> alpha_shares,
                                           int mask_bits);

}  // namespace ariann
