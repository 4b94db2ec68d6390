#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ariann/run.hpp"
#include "ariann/sharing.hpp"
#include "test_util.hpp"

using namespace ariann;

TEST(FixedPoint, Examples) {
  EXPECT_EQ(encode_fixed_scalar(1.5, 3, 32), 1500);
  const double v = -2.0;
  const auto t = encode_fixed({&v, 1}, {1}, 3, 32);
  EXPECT_EQ(t[0], (1ULL << 32) - 2000);
  EXPECT_DOUBLE_EQ(decode_fixed(t, 3)[0], -2.0);
}

TEST(FixedPoint, RoundTripWithinOneUlp) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-100, 100);
  std::vector<double> vs(10000);
  for (auto& v : vs) v = u(gen);
  const auto t = encode_fixed(vs, {vs.size()}, 3, 32);
  const auto back = decode_fixed(t, 3);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    EXPECT_LE(std::fabs(back[i] - vs[i]), 1e-3);
    EXPECT_LE(back[i], vs[i] + 1e-9);  // floor
  }
}

TEST(FixedPoint, Overflow) {
  EXPECT_THROW(encode_fixed_scalar(2.2e6, 3, 32), std::range_error);
  EXPECT_THROW(encode_fixed_scalar(-2147484.0, 3, 32), std::range_error);
  EXPECT_NO_THROW(encode_fixed_scalar(-2147483.648, 3, 32));
  EXPECT_THROW(encode_fixed_scalar(NAN, 3, 32), std::range_error);
}

TEST(Share, ReconstructAndZero) {
  Rng rng(3);
  for (int n : {8, 32, 64}) {
    std::vector<std::uint64_t> v(50);
    for (auto& e : v) e = rng.next_bits(n);
    const RingTensor s({5, 10}, n, v);
    auto [a, b] = share(s, rng, 2);
    EXPECT_EQ(reconstruct(a, b), s);
    EXPECT_EQ(a.precision(), 2);
  }
  auto [z0, z1] = share(RingTensor({16}, 32), rng);
  EXPECT_EQ(z0.values(), -z1.values());
}

TEST(Share, MetadataMismatchRejected) {
  Rng rng(4);
  auto [a, b] = share(RingTensor({4}, 32), rng, 3);
  EXPECT_THROW(reconstruct(a, b.with_precision(2)), std::invalid_argument);
  EXPECT_THROW(reconstruct(b, a), std::invalid_argument);
  EXPECT_THROW(reconstruct(a, b.reshaped({2, 2})), std::invalid_argument);
  EXPECT_THROW(a + b, std::invalid_argument);
}

TEST(Share, FirstShareBytesUniform) {
  Rng rng(6);
  const RingTensor secret = RingTensor::scalar(0xDEADBEEF, 64).reshaped({1});
  testutil::ByteHistogram h;
  for (int i = 0; i < 10000; ++i) {
    auto [a, b] = share(secret, rng);
    const auto bytes = pack_ring(a.values().data(), 64);
    h.add(bytes);
  }
  EXPECT_LT(h.chi_square(), testutil::kChi2Crit255);
}

TEST(Share, LinearityAndPublicConstants) {
  Rng rng(7);
  const auto x = RingTensor::from_signed({3}, 32, std::vector<std::int64_t>{1, -2, 3});
  const auto y = RingTensor::from_signed({3}, 32, std::vector<std::int64_t>{10, 20, -30});
  auto [x0, x1] = share(x, rng);
  auto [y0, y1] = share(y, rng);
  EXPECT_EQ(reconstruct(x0 + y0, x1 + y1), x + y);
  EXPECT_EQ(reconstruct(x0 - y0, x1 - y1), x - y);
  EXPECT_EQ(reconstruct(-x0, -x1), -x);
  const auto c = RingTensor::scalar(5, 32);
  EXPECT_EQ(reconstruct(add_public(x0, c), add_public(x1, c)).signed_values(),
            (std::vector<std::int64_t>{6, 3, 8}));
  EXPECT_EQ(reconstruct(public_minus(c, x0), public_minus(c, x1)).signed_values(),
            (std::vector<std::int64_t>{4, 7, 2}));
  EXPECT_EQ(reconstruct(scale(x0, -3), scale(x1, -3)).signed_values(),
            (std::vector<std::int64_t>{-3, 6, -9}));
  const auto m = mul_public(x0, y, 2);
  EXPECT_EQ(m.precision(), 2);
  EXPECT_EQ(reconstruct(m, mul_public(x1, y, 2)), x * y);
}

TEST(Truncate, Examples) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    auto [a, b] = share(RingTensor::scalar(3000000, 32).reshaped({1}), rng, 6);
    const auto r = reconstruct(truncate(a, 3), truncate(b, 3));
    EXPECT_LE(std::llabs(r.signed_values()[0] - 3000), 1);
  }
  auto [a, b] = share(RingTensor::scalar(123, 32).reshaped({1}), rng, 3);
  EXPECT_EQ(truncate(a, 0).values(), a.values());
  EXPECT_THROW(truncate(a, 4), std::invalid_argument);
}

// Products of magnitude up to 10^4 fixed-point units, truncated back from
// precision 6 to 3 in a 32-bit ring.
TEST(Truncate, MonteCarloErrorBound) {
  Rng rng(9);
  std::mt19937_64 gen(10);
  std::uniform_int_distribution<std::int64_t> dist(-10000, 10000);
  int within = 0;
  int wraps = 0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const std::int64_t z = dist(gen);
    auto [a, b] = share(RingTensor::from_signed({1}, 32, std::vector<std::int64_t>{z}), rng, 6);
    const auto r = reconstruct(truncate(a, 3), truncate(b, 3));
    const double err = std::fabs(decode_fixed(r, 3)[0] - static_cast<double>(z) * 1e-6);
    if (err <= 2e-3) ++within;
    if (err > 1.0) ++wraps;
  }
  EXPECT_GE(within, trials * 999 / 1000);
  EXPECT_LE(wraps, trials / 1000);
}

TEST(MaskAndReveal, ExamplesAndLedger) {
  auto r = run_two_party([](Session& s) {
    auto y = public_share(s.party(), RingTensor({2}, 8, {5, 250}), 0);
    const std::vector<std::uint64_t> alpha_share = s.party() == 0
                                                       ? std::vector<std::uint64_t>{3, 200}
                                                       : std::vector<std::uint64_t>{7, 66};
    return mask_and_reveal(s, y, alpha_share, 8);
  });
  EXPECT_EQ(r.out[0], (std::vector<std::uint64_t>{15, 4}));
  EXPECT_EQ(r.out[1], r.out[0]);
  EXPECT_EQ(r.ledger[0].total().rounds, 1U);
  EXPECT_EQ(r.ledger[0].total().elements, 2U);
}

TEST(MaskAndReveal, MaskedValueUniformOverFreshMasks) {
  // y fixed, alpha uniform over all of Z_2^8: x hits every value once.
  Rng rng(11);
  std::vector<std::uint64_t> a0(256), a1(256);
  for (std::uint64_t a = 0; a < 256; ++a) {
    a0[a] = rng.next_bits(8);
    a1[a] = (a - a0[a]) & 0xFF;
  }
  auto r = run_two_party([&](Session& s) {
    auto y = public_share(s.party(), RingTensor({256}, 8, std::vector<std::uint64_t>(256, 77)), 0);
    return mask_and_reveal(s, y, s.party() == 0 ? a0 : a1, 8);
  });
  std::vector<int> seen(256, 0);
  for (auto x : r.out[0]) ++seen[x];
  for (int c : seen) EXPECT_EQ(c, 1);
}
