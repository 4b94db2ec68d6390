#include "ariann/sharing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ariann/session.hpp"

namespace ariann {
namespace {

std::atomic<std::uint64_t> g_reconstructions{0};

void check_party(int party) {
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
}

}  // namespace

std::int64_t pow10(int p) {
  if (p < 0 || p > 18) throw std::invalid_argument("decimal precision must be in [0, 18]");
  std::int64_t r = 1;
  for (int i = 0; i < p; ++i) r *= 10;
  return r;
}

AdditiveShare::AdditiveShare(int party, RingTensor values, int precision)
    : party_(party), values_(std::move(values)), precision_(precision) {
  check_party(party);
  if (precision < 0) throw std::invalid_argument("precision must be non-negative");
}

AdditiveShare AdditiveShare::reshaped(Shape shape) const {
  return {party_, values_.reshaped(std::move(shape)), precision_};
}

AdditiveShare AdditiveShare::with_precision(int precision) const {
  return {party_, values_, precision};
}

void check_compatible(const AdditiveShare& a, const AdditiveShare& b) {
  if (a.party() != b.party()) throw std::invalid_argument("shares belong to different parties");
  if (a.precision() != b.precision()) {
    throw std::invalid_argument("precision mismatch: " + std::to_string(a.precision()) + " vs " +
                                std::to_string(b.precision()));
  }
  if (a.n_bits() != b.n_bits()) throw std::invalid_argument("ring width mismatch");
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("shape mismatch: " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

AdditiveShare operator+(const AdditiveShare& a, const AdditiveShare& b) {
  check_compatible(a, b);
  return {a.party(), a.values() + b.values(), a.precision()};
}

AdditiveShare operator-(const AdditiveShare& a, const AdditiveShare& b) {
  check_compatible(a, b);
  return {a.party(), a.values() - b.values(), a.precision()};
}

AdditiveShare operator-(const AdditiveShare& a) { return {a.party(), -a.values(), a.precision()}; }

AdditiveShare add_public(const AdditiveShare& x, const RingTensor& c) {
  if (x.party() == 1) {
    if (c.n_bits() != x.n_bits()) throw std::invalid_argument("ring width mismatch");
    return x;
  }
  return {0, x.values() + c, x.precision()};
}

AdditiveShare sub_public(const AdditiveShare& x, const RingTensor& c) {
  return add_public(x, -c);
}

AdditiveShare public_minus(const RingTensor& c, const AdditiveShare& x) {
  return add_public(-x, c);
}

AdditiveShare mul_public(const AdditiveShare& x, const RingTensor& c, int c_precision) {
  return {x.party(), x.values() * c, x.precision() + c_precision};
}

AdditiveShare scale(const AdditiveShare& x, std::int64_t k) {
  return {x.party(), x.values() * RingTensor::scalar(static_cast<std::uint64_t>(k), x.n_bits()),
          x.precision()};
}

AdditiveShare public_share(int party, const RingTensor& c, int precision) {
  check_party(party);
  return {party, party == 0 ? c : RingTensor(c.shape(), c.n_bits()), precision};
}

AdditiveShare truncate(const AdditiveShare& x, int digits) {
  if (digits == 0) return x;
  if (digits < 0 || digits > x.precision()) {
    throw std::invalid_argument("cannot truncate " + std::to_string(digits) +
                                " digits from precision " + std::to_string(x.precision()));
  }
  const auto d = static_cast<std::uint64_t>(pow10(digits));
  const std::uint64_t mask = x.values().mask();
  std::vector<std::uint64_t> out(x.size());
  const auto v = x.values().data();
  if (x.party() == 0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] / d;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0 - (((0 - v[i]) & mask) / d);
  }
  return {x.party(), RingTensor::wrap(x.shape(), x.n_bits(), std::move(out)),
          x.precision() - digits};
}

int constant_precision(double c, int n_bits, int precision) {
  if (n_bits < 64 || c == 0.0) return precision;
  const int lead = static_cast<int>(std::floor(std::log10(std::fabs(c))));
  return std::clamp(5 - lead, precision, 12);
}

AdditiveShare mul_public_scalar(const AdditiveShare& x, double c) {
  const int q = constant_precision(c, x.n_bits(), x.precision());
  const RingTensor k = RingTensor::scalar(from_signed(encode_fixed_scalar(c, q, x.n_bits()), x.n_bits()),
                                          x.n_bits());
  return truncate(mul_public(x, k, q), q);
}

AdditiveShare div_public(const AdditiveShare& x, double d) {
  if (d == 0.0) throw std::invalid_argument("division by zero");
  return mul_public_scalar(x, 1.0 / d);
}

RingTensor truncate_plain(const RingTensor& t, int digits) {
  const std::int64_t d = pow10(digits);
  std::vector<std::uint64_t> out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t v = to_signed(t[i], t.n_bits());
    std::int64_t q = v / d;
    if (v % d != 0 && v < 0) --q;
    out[i] = from_signed(q, t.n_bits());
  }
  return RingTensor(t.shape(), t.n_bits(), std::move(out));
}

std::pair<AdditiveShare, AdditiveShare> share(const RingTensor& secret, Rng& rng, int precision) {
  std::vector<std::uint64_t> r(secret.size());
  for (auto& v : r) v = rng.next_bits(secret.n_bits());
  RingTensor s0(secret.shape(), secret.n_bits(), std::move(r));
  RingTensor s1 = secret - s0;
  return {AdditiveShare(0, std::move(s0), precision), AdditiveShare(1, std::move(s1), precision)};
}

RingTensor reconstruct(const AdditiveShare& s0, const AdditiveShare& s1) {
  if (s0.party() != 0 || s1.party() != 1) {
    throw std::invalid_argument("reconstruct needs party 0's and party 1's shares");
  }
  if (s0.precision() != s1.precision() || s0.n_bits() != s1.n_bits() ||
      s0.shape() != s1.shape()) {
    throw std::invalid_argument("reconstruct: share metadata differs");
  }
  g_reconstructions.fetch_add(1);
  return s0.values() + s1.values();
}

std::uint64_t reconstruction_count() { return g_reconstructions.load(); }

std::int64_t encode_fixed_scalar(double v, int precision, int n_bits) {
  check_ring_bits(n_bits);
  if (!std::isfinite(v)) throw std::range_error("cannot encode a non-finite value");
  const double scaled = std::floor(v * static_cast<double>(pow10(precision)) + 1e-7);
  const double limit = std::ldexp(1.0, n_bits - 1);
  if (scaled >= limit || scaled < -limit) {
    throw std::range_error("fixed-point overflow: " + std::to_string(v) + " at precision " +
                           std::to_string(precision) + " does not fit in " +
                           std::to_string(n_bits) + " bits");
  }
  return static_cast<std::int64_t>(scaled);
}

RingTensor encode_fixed(std::span<const double> v, Shape shape, int precision, int n_bits) {
  std::vector<std::uint64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = from_signed(encode_fixed_scalar(v[i], precision, n_bits), n_bits);
  }
  return RingTensor(std::move(shape), n_bits, std::move(out));
}

double decode_fixed_scalar(std::uint64_t v, int precision, int n_bits) {
  return static_cast<double>(to_signed(v, n_bits)) / static_cast<double>(pow10(precision));
}

std::vector<double> decode_fixed(const RingTensor& t, int precision) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = decode_fixed_scalar(t[i], precision, t.n_bits());
  return out;
}

std::vector<std::uint64_t> mask_and_reveal(Session& s, const AdditiveShare& y,
                                           std::span<const std::uint64_t> alpha_shares,
                                           int mask_bits) {
  if (alpha_shares.size() != y.size()) {
    throw std::invalid_argument("mask_and_reveal: " + std::to_string(alpha_shares.size()) +
                                " masks for " + std::to_string(y.size()) + " elements");
  }
  if (y.party() != s.party()) throw std::invalid_argument("share belongs to the other party");
  const std::uint64_t mask = ring_mask(mask_bits);
  std::vector<std::uint64_t> mine(y.size());
  for (std::size_t i = 0; i < mine.size(); ++i) {
    mine[i] = (y.values()[i] + alpha_shares[i]) & mask;
  }
  const auto theirs = s.exchange(FrameType::kMaskedShare, mine, mask_bits);
  for (std::size_t i = 0; i < mine.size(); ++i) mine[i] = (mine[i] + theirs[i]) & mask;
  return mine;
}

}  // namespace ariann
