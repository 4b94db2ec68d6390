#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ariann/nn_ops.hpp"
#include "ariann/run.hpp"
#include "test_util.hpp"

using namespace ariann;

namespace {

struct Shared {
  AdditiveShare s0, s1;
  const AdditiveShare& of(const Session& s) const { return s.party() == 0 ? s0 : s1; }
};

Shared share_signed(const std::vector<std::int64_t>& v, Shape shape, int n, int p,
                    std::uint64_t seed = 1) {
  Rng rng(seed);
  auto [a, b] = share(RingTensor::from_signed(std::move(shape), n, v), rng, p);
  return {a, b};
}

Shared share_real(const std::vector<double>& v, Shape shape, int n, int p, std::uint64_t seed = 1) {
  Rng rng(seed);
  auto [a, b] = share(encode_fixed(v, std::move(shape), p, n), rng, p);
  return {a, b};
}

std::vector<std::int64_t> open(const RunResult<AdditiveShare>& r) {
  return reconstruct(r.out[0], r.out[1]).signed_values();
}

std::vector<double> open_real(const RunResult<AdditiveShare>& r) {
  return decode_fixed(reconstruct(r.out[0], r.out[1]), r.out[0].precision());
}

bool same_material(const PrepPlan& a, const PrepPlan& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].matches(b[i])) return false;
  }
  return true;
}

std::vector<double> plain_maxpool(const std::vector<double>& x, std::size_t h, std::size_t w,
                                  std::size_t k, std::size_t s) {
  const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < ho; ++i)
    for (std::size_t j = 0; j < wo; ++j) {
      double m = -1e300;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) m = std::max(m, x[(i * s + u) * w + j * s + v]);
      out.push_back(m);
    }
  return out;
}

}  // namespace

TEST(Relu, ExamplesRoundsAndPlan) {
  const auto x = share_signed({-2, 0, 3}, {3}, 64, 0);
  auto r = run_two_party([&](Session& s) { return relu(s, x.of(s)); });
  EXPECT_EQ(open(r), (std::vector<std::int64_t>{0, 0, 3}));
  EXPECT_EQ(r.ledger[0].get("relu").rounds, 2U);
  EXPECT_EQ(r.ledger[0].total().rounds, 2U);
  EXPECT_TRUE(same_material(r.prep_log[0], relu_plan(3, 64)));

  const auto neg = share_signed({-1, -50, -7, -1000}, {2, 2}, 64, 0);
  auto z = run_two_party([&](Session& s) { return relu(s, neg.of(s)); });
  EXPECT_EQ(open(z), (std::vector<std::int64_t>(4, 0)));
  EXPECT_EQ(z.out[0].shape(), (Shape{2, 2}));
}

TEST(Relu, TenThousandRandomValues) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-100, 100);
  std::vector<double> v(10000);
  for (auto& e : v) e = u(gen);
  const auto x = share_real(v, {v.size()}, 32, 3);
  auto r = run_two_party([&](Session& s) { return relu(s, x.of(s), 32); });
  const auto got = open_real(r);
  const auto enc = decode_fixed(encode_fixed(v, {v.size()}, 3, 32), 3);
  int bad = 0;
  for (std::size_t i = 0; i < v.size(); ++i) bad += got[i] != std::max(0.0, enc[i]);
  // Expected failures: sum |y| / 2^32 ~ 1e4 * 5e4 / 4.3e9 ~ 0.1
  EXPECT_LE(bad, 2);
}

TEST(Relu, PlusReluOfNegationIsAbs) {
  std::vector<std::int64_t> v;
  for (int i = -300; i <= 300; i += 7) v.push_back(i == 0 ? 1 : i);
  const auto x = share_signed(v, {v.size()}, 64, 0);
  auto r = run_two_party([&](Session& s) { return relu(s, x.of(s)) + relu(s, -x.of(s)); });
  const auto got = open(r);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(got[i], std::llabs(v[i]));
  EXPECT_EQ(r.ledger[0].get("relu").rounds, 4U);
}

TEST(Relu, MaskIsDerivative) {
  const auto x = share_signed({-4, 0, 9}, {3}, 64, 0);
  auto r = run_two_party([&](Session& s) { return relu_with_mask(s, x.of(s)).mask; });
  EXPECT_EQ(open(r), (std::vector<std::int64_t>{0, 0, 1}));
}

TEST(Argmax, ExamplesRoundsAndPlan) {
  const auto x = share_signed({1, 3, 2}, {3}, 64, 0);
  auto r = run_two_party([&](Session& s) { return argmax(s, x.of(s)); });
  EXPECT_EQ(open(r), (std::vector<std::int64_t>{0, 1, 0}));
  EXPECT_EQ(r.ledger[0].get("argmax").rounds, 2U);
  EXPECT_TRUE(same_material(r.prep_log[0], argmax_plan(1, 3, 64)));

  const auto t = share_signed({5, 5, 1}, {3}, 64, 0);
  auto ties = run_two_party([&](Session& s) { return argmax(s, t.of(s)); });
  EXPECT_EQ(open(ties), (std::vector<std::int64_t>{1, 1, 0}));
  EXPECT_THROW(run_two_party([&](Session& s) { return argmax(s, x.of(s).reshaped({3, 1})); }),
               std::invalid_argument);
}

TEST(Argmax, ThousandRandomDistinctRows) {
  std::mt19937_64 gen(4);
  const std::size_t rows = 1000, m = 10;
  std::vector<std::int64_t> v(rows * m);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::int64_t> row(m);
    std::iota(row.begin(), row.end(), 0);
    std::shuffle(row.begin(), row.end(), gen);
    for (std::size_t i = 0; i < m; ++i) v[r * m + i] = row[i] * 37 - 150;
  }
  const auto x = share_signed(v, {rows, m}, 64, 0);
  auto r = run_two_party([&](Session& s) { return argmax(s, x.of(s)); });
  const auto got = open(r);
  EXPECT_EQ(r.ledger[0].total().rounds, 2U);
  for (std::size_t row = 0; row < rows; ++row) {
    const auto best = std::max_element(v.begin() + row * m, v.begin() + (row + 1) * m) - v.begin();
    for (std::size_t i = 0; i < m; ++i) {
      EXPECT_EQ(got[row * m + i], static_cast<std::int64_t>(row * m + i) == best ? 1 : 0);
    }
  }
}

TEST(Argmax, SumEqualsMultiplicityOfMax) {
  const auto x = share_signed({7, 2, 7, 7, 0, 0}, {6}, 64, 0);
  auto r = run_two_party([&](Session& s) { return sum_last_axis(argmax(s, x.of(s))); });
  EXPECT_EQ(open(r)[0], 3);
}

TEST(BreakTies, Examples) {
  const auto single = share_signed({0, 1, 0}, {3}, 64, 0);
  auto r = run_two_party([&](Session& s) { return break_ties(s, single.of(s)); });
  EXPECT_EQ(open(r), (std::vector<std::int64_t>{0, 1, 0}));
  EXPECT_EQ(r.ledger[0].get("break_ties").rounds, 1U);
  EXPECT_TRUE(same_material(r.prep_log[0], break_ties_plan(1, 3, 64)));

  std::vector<std::int64_t> triple(300, 1);
  const auto three = share_signed(triple, {100, 3}, 64, 0);
  auto t = run_two_party([&](Session& s) { return break_ties(s, three.of(s)); });
  const auto got = open(t);
  for (std::size_t row = 0; row < 100; ++row) {
    int sum = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_TRUE(got[row * 3 + i] == 0 || got[row * 3 + i] == 1);
      sum += static_cast<int>(got[row * 3 + i]);
    }
    EXPECT_EQ(sum, 1);
  }
}

TEST(BreakTies, TwoWayTieIsFair) {
  const std::size_t trials = 10000;
  const auto x = share_signed(std::vector<std::int64_t>(2 * trials, 1), {trials, 2}, 64, 0);
  auto r = run_two_party([&](Session& s) { return break_ties(s, x.of(s)); });
  const auto got = open(r);
  std::uint64_t first = 0;
  for (std::size_t row = 0; row < trials; ++row) {
    first += got[2 * row] == 1;
    EXPECT_EQ(got[2 * row] + got[2 * row + 1], 1);
  }
  EXPECT_TRUE(testutil::within_sigma(first, trials, 0.5, 3.0)) << first;
}

TEST(BreakTies, AfterArgmaxIsOneHot) {
  const auto x = share_signed({4, 9, 9, 1, 9}, {5}, 64, 0);
  auto r = run_two_party([&](Session& s) { return break_ties(s, argmax(s, x.of(s))); });
  const auto got = open(r);
  EXPECT_EQ(std::accumulate(got.begin(), got.end(), std::int64_t{0}), 1);
  EXPECT_EQ(got[0] + got[3], 0);
}

TEST(MaxPool, ExamplesRoundsAndPlan) {
  const auto x = share_signed({1, 2, 3, 4}, {1, 1, 2, 2}, 64, 0);
  auto r = run_two_party([&](Session& s) { return maxpool(s, x.of(s), 2, 2); });
  EXPECT_EQ(open(r), (std::vector<std::int64_t>{4}));
  EXPECT_EQ(r.out[0].shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(r.ledger[0].get("maxpool").rounds, 3U);
  EXPECT_EQ(r.ledger[0].total().rounds, 3U);
  EXPECT_TRUE(same_material(r.prep_log[0], maxpool_plan({1, 1, 2, 2}, 2, 2, 64)));

  auto k2 = run_two_party([&](Session& s) { return maxpool_k2(s, x.of(s), 2); });
  EXPECT_EQ(open(k2), (std::vector<std::int64_t>{4}));
  EXPECT_EQ(k2.ledger[0].get("maxpool_k2").rounds, 4U);
  EXPECT_TRUE(same_material(k2.prep_log[0], maxpool_k2_plan({1, 1, 2, 2}, 2, 64)));
}

TEST(MaxPool, ConstantInput) {
  const auto x = share_signed(std::vector<std::int64_t>(16, 1234), {1, 1, 4, 4}, 64, 3);
  auto r = run_two_party([&](Session& s) { return maxpool(s, x.of(s), 2, 2); });
  EXPECT_EQ(open(r), (std::vector<std::int64_t>(4, 1234)));
  EXPECT_EQ(r.out[0].precision(), 3);
  auto k2 = run_two_party([&](Session& s) { return maxpool_k2(s, x.of(s), 2); });
  EXPECT_EQ(open(k2), (std::vector<std::int64_t>(4, 1234)));
}

TEST(MaxPool, RandomInputsMatchOracleAndEachOther) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(64);
    for (auto& e : v) e = u(gen);
    const auto enc = decode_fixed(encode_fixed(v, {64}, 3, 64), 3);
    const auto x = share_real(v, {1, 1, 8, 8}, 64, 3, static_cast<std::uint64_t>(trial));
    RunOptions opt;
    opt.dealer_seed = static_cast<std::uint64_t>(trial) + 100;
    auto a = run_two_party([&](Session& s) { return maxpool(s, x.of(s), 2, 2); }, opt);
    auto b = run_two_party([&](Session& s) { return maxpool_k2(s, x.of(s), 2); }, opt);
    const auto want = plain_maxpool(enc, 8, 8, 2, 2);
    const auto ga = open_real(a), gb = open_real(b);
    ASSERT_EQ(ga.size(), 16U);
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_DOUBLE_EQ(ga[i], want[i]);
      EXPECT_DOUBLE_EQ(gb[i], want[i]);
    }
  }
}

TEST(MaxPool, GeneralGeometryAndComparisonCounts) {
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<std::int64_t> d(-1000, 1000);
  std::vector<std::int64_t> v(2 * 3 * 7 * 7);
  for (auto& e : v) e = d(gen);
  const auto x = share_signed(v, {2, 3, 7, 7}, 64, 0);
  auto r = run_two_party([&](Session& s) { return maxpool(s, x.of(s), 3, 2); });
  const auto got = open(r);
  ASSERT_EQ(r.out[0].shape(), (Shape{2, 3, 3, 3}));
  for (std::size_t c = 0; c < 6; ++c) {
    std::vector<double> plane(v.begin() + c * 49, v.begin() + (c + 1) * 49);
    const auto want = plain_maxpool(plane, 7, 7, 3, 2);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(got[c * 9 + i], want[i]);
  }
  // maxpool: k^2 (k^2 - 1) comparisons per window; maxpool_k2: k^2 - 1.
  const auto p1 = maxpool_plan({1, 1, 8, 8}, 2, 2, 64);
  const auto p2 = maxpool_k2_plan({1, 1, 8, 8}, 2, 64);
  std::size_t c1 = 0, c2 = 0;
  for (const auto& q : p1) c1 += q.kind == PrepKind::kCmp ? q.count : 0;
  for (const auto& q : p2) c2 += q.kind == PrepKind::kCmp ? q.count : 0;
  EXPECT_EQ(c1, 16U * 12);
  EXPECT_EQ(c2, 16U * 3);
  EXPECT_THROW(maxpool_plan({1, 1, 2, 2}, 3, 2, 64), std::invalid_argument);
}

TEST(InvSqrt, ClassicNewton) {
  const auto v = share_real({4.0}, {1}, 64, 6);
  auto r = run_two_party([&](Session& s) { return inv_sqrt_newton(s, v.of(s), 0.4, 5, 2); });
  EXPECT_NEAR(open_real(r)[0], 0.5, 0.005);
  EXPECT_EQ(r.ledger[0].get("inv_sqrt").rounds, 15U);
  EXPECT_TRUE(same_material(r.prep_log[0], inv_sqrt_plan(1, 64, 5)));
}

TEST(InvSqrt, ColdStartCoversRange) {
  std::vector<double> vs;
  for (double e = -2; e <= 2.001; e += 0.25) vs.push_back(std::pow(10.0, e));
  const auto v = share_real(vs, {vs.size()}, 64, 6);
  auto r = run_two_party([&](Session& s) { return inv_sqrt_newton(s, v.of(s), 0.2, 50, 6); });
  const auto got = open_real(r);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    EXPECT_NEAR(got[i] * std::sqrt(vs[i]), 1.0, 0.01) << vs[i];
  }
}

TEST(InvSqrt, WarmStartOnDriftingVariance) {
  // Variance drifting 10% per batch across [1e-2, 1e2]; warm start, 3 iters.
  std::vector<double> seq;
  for (double v = 1e-2; v <= 1e2; v *= 1.1) seq.push_back(v);
  auto r = run_two_party([&](Session& s) {
    std::vector<double> errors;
    std::optional<AdditiveShare> theta;
    Rng rng(7);
    for (double v : seq) {
      auto [a, b] = share(encode_fixed(std::vector<double>{v}, {1}, 6, 64), rng, 6);
      const AdditiveShare& mine = s.party() == 0 ? a : b;
      theta = theta ? inv_sqrt_newton(s, mine, *theta, 3, 6) : inv_sqrt_newton(s, mine, 0.2, 50, 6);
      // Test harness opening only: exchange the shares to measure the error.
      const auto theirs = s.exchange(FrameType::kReveal, theta->values().data(), 64);
      const double est = decode_fixed_scalar(theta->values()[0] + theirs[0], 6, 64);
      errors.push_back(std::fabs(est * std::sqrt(v) - 1.0));
    }
    return errors;
  });
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_LE(r.out[0][i], 0.05) << seq[i];
}

TEST(BatchNorm, ConstantBatchGivesBeta) {
  const auto x = share_real(std::vector<double>(12, 3.5), {4, 3}, 64, 4);
  const auto gamma = share_real({1.0, 2.0, -1.0}, {3}, 64, 4, 2);
  const auto beta = share_real({0.5, -1.0, 2.0}, {3}, 64, 4, 3);
  auto r = run_two_party([&](Session& s) {
    BatchNormState st;
    return batchnorm_forward(s, x.of(s), gamma.of(s), beta.of(s), st);
  });
  const auto got = open_real(r);
  const std::vector<double> want{0.5, -1, 2};
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(got[i], want[i % 3], 2e-3);
}

TEST(BatchNorm, UnitVarianceAndPlan) {
  const auto x = share_real({-1.0, 1.0}, {2, 1}, 64, 4);
  const auto gamma = share_real({1.0}, {1}, 64, 4, 2);
  const auto beta = share_real({0.0}, {1}, 64, 4, 3);
  auto r = run_two_party([&](Session& s) {
    BatchNormState st;
    return batchnorm_forward(s, x.of(s), gamma.of(s), beta.of(s), st);
  });
  const auto got = open_real(r);
  const double want = 1.0 / std::sqrt(1.0 + 1e-3);
  EXPECT_NEAR(got[0], -want, 0.05 * want);
  EXPECT_NEAR(got[1], want, 0.05 * want);
  EXPECT_TRUE(same_material(r.prep_log[0], batchnorm_plan(2, 1, 64, 50)));
  EXPECT_EQ(r.ledger[0].get("batchnorm").rounds, 1U + 3 * 50 + 2);
}

TEST(BatchNorm, RandomBatchAgainstPlaintext) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd(0, 1);
  const std::size_t b = 32, f = 8;
  std::vector<double> v(b * f), gamma(f), beta(f);
  for (std::size_t j = 0; j < f; ++j) {
    gamma[j] = 0.5 + 0.1 * static_cast<double>(j);
    beta[j] = 0.2 * static_cast<double>(j) - 0.5;
  }
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < f; ++j) v[i * f + j] = 2.0 + (0.2 + static_cast<double>(j)) * nd(gen);
  const auto x = share_real(v, {b, f}, 64, 4);
  const auto g = share_real(gamma, {f}, 64, 4, 2);
  const auto be = share_real(beta, {f}, 64, 4, 3);
  auto r = run_two_party([&](Session& s) {
    BatchNormState st;
    batchnorm_forward(s, x.of(s), g.of(s), be.of(s), st);  // cold
    return batchnorm_forward(s, x.of(s), g.of(s), be.of(s), st);  // warm
  });
  const auto got = open_real(r);
  for (std::size_t j = 0; j < f; ++j) {
    double mu = 0, var = 0;
    for (std::size_t i = 0; i < b; ++i) mu += v[i * f + j];
    mu /= b;
    for (std::size_t i = 0; i < b; ++i) var += (v[i * f + j] - mu) * (v[i * f + j] - mu);
    var /= b;
    for (std::size_t i = 0; i < b; ++i) {
      const double norm = gamma[j] * (v[i * f + j] - mu) / std::sqrt(var + 1e-3);
      const double want = norm + beta[j];
      EXPECT_NEAR(got[i * f + j], want, 0.05 * std::fabs(norm) + 2e-3);
    }
  }
}
