#include <gtest/gtest.h>

#include <cmath>

#include "ariann/beaver.hpp"
#include "ariann/errors.hpp"
#include "ariann/run.hpp"
#include "test_util.hpp"

using namespace ariann;

namespace {

RingTensor random_tensor(Shape shape, int n, Rng& rng) {
  std::vector<std::uint64_t> v(shape_size(shape));
  for (auto& e : v) e = rng.next_bits(n);
  return RingTensor(std::move(shape), n, std::move(v));
}

RingTensor rec(const TriplePair& p, RingTensor TripleShare::*f) { return p.t0.*f + p.t1.*f; }

// Plaintext oracles written independently of linalg.
RingTensor naive_matmul(const RingTensor& a, const RingTensor& b) {
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<std::uint64_t> out(m * n, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) out[i * n + j] += a[i * k + t] * b[t * n + j];
  return RingTensor::wrap({m, n}, a.n_bits(), std::move(out));
}

RingTensor naive_conv(const RingTensor& x, const RingTensor& w, const ConvGeometry& g) {
  std::vector<std::uint64_t> out(shape_size(g.output_shape()), 0);
  const auto ho = g.out_height(), wo = g.out_width();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          std::uint64_t acc = 0;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t u = 0; u < g.kernel; ++u)
              for (std::size_t v = 0; v < g.kernel; ++v) {
                const auto r = static_cast<std::ptrdiff_t>(i * g.stride + u) -
                               static_cast<std::ptrdiff_t>(g.padding);
                const auto q = static_cast<std::ptrdiff_t>(j * g.stride + v) -
                               static_cast<std::ptrdiff_t>(g.padding);
                if (r < 0 || q < 0 || r >= static_cast<std::ptrdiff_t>(g.height) ||
                    q >= static_cast<std::ptrdiff_t>(g.width))
                  continue;
                acc += x[((b * g.in_channels + c) * g.height + r) * g.width + q] *
                       w[((o * g.in_channels + c) * g.kernel + u) * g.kernel + v];
              }
          out[((b * g.out_channels + o) * ho + i) * wo + j] = acc;
        }
  return RingTensor::wrap(g.output_shape(), x.n_bits(), std::move(out));
}

template <class F>
RingTensor run_bilinear(const TripleSpec& spec, const RingTensor& x, const RingTensor& y,
                        F protocol, RunOptions opt = {}) {
  Rng rng(opt.dealer_seed + 1000);
  auto [x0, x1] = share(x, rng);
  auto [y0, y1] = share(y, rng);
  auto r = run_two_party(
      [&](Session& s) {
        const auto t = s.take_triple(spec);
        return s.party() == 0 ? protocol(s, x0, y0, t) : protocol(s, x1, y1, t);
      },
      opt);
  EXPECT_EQ(r.ledger[0].total().rounds, 1U);
  return reconstruct(r.out[0], r.out[1]);
}

}  // namespace

TEST(Triple, ElementwiseMatmulConvCorrelation) {
  Rng rng(1);
  const auto e = gen_triple(TripleSpec::mul({4}, 32), rng);
  EXPECT_EQ(rec(e, &TripleShare::c), rec(e, &TripleShare::a) * rec(e, &TripleShare::b));
  EXPECT_EQ(e.t0.id, e.t1.id);

  const auto m = gen_triple(TripleSpec::matmul(2, 3, 2, 64), rng);
  EXPECT_EQ(rec(m, &TripleShare::c).shape(), (Shape{2, 2}));
  EXPECT_EQ(rec(m, &TripleShare::c),
            naive_matmul(rec(m, &TripleShare::a), rec(m, &TripleShare::b)));

  ConvGeometry g;
  g.height = g.width = 4;
  g.kernel = 2;
  g.stride = 2;
  const auto c = gen_triple(TripleSpec::conv(g, 64), rng);
  EXPECT_EQ(rec(c, &TripleShare::c),
            naive_conv(rec(c, &TripleShare::a), rec(c, &TripleShare::b), g));
}

TEST(Triple, UnsupportedGeometry) {
  Rng rng(2);
  TripleSpec bad = TripleSpec::matmul(2, 3, 2, 32);
  bad.y_shape = {4, 2};
  EXPECT_THROW(gen_triple(bad, rng), std::invalid_argument);
  ConvGeometry g;
  g.height = g.width = 2;
  g.kernel = 3;
  EXPECT_THROW(TripleSpec::conv(g, 32), std::invalid_argument);
}

TEST(Triple, EncodeRoundTripAndRejects) {
  Rng rng(3);
  ConvGeometry g;
  g.batch = 2;
  g.in_channels = 3;
  g.height = g.width = 5;
  g.out_channels = 2;
  g.kernel = 3;
  g.padding = 1;
  for (const auto& spec : {TripleSpec::mul({3, 4}, 32), TripleSpec::matmul(3, 5, 2, 64),
                           TripleSpec::conv(g, 40)}) {
    const auto p = gen_triple(spec, rng);
    const auto kb = deserialize_keys(serialize_keys(pack_triple(&p.t0, &p.t1)));
    EXPECT_EQ(unpack_triple(kb, 0), p.t0);
    EXPECT_EQ(unpack_triple(kb, 1), p.t1);
    auto bytes = encode_triple(p.t0);
    bytes.pop_back();
    EXPECT_THROW(decode_triple(bytes), FormatError);
  }
}

TEST(MulProtocol, Examples) {
  const auto spec = TripleSpec::mul({1}, 32);
  auto mul = [](Session& s, const AdditiveShare& x, const AdditiveShare& y,
                const TripleShare& t) { return mul_protocol(s, x, y, t); };
  EXPECT_EQ(run_bilinear(spec, RingTensor({1}, 32, {5}), RingTensor({1}, 32, {6}), mul)[0], 30U);
  Rng rng(4);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(run_bilinear(spec, RingTensor({1}, 32, {0}), random_tensor({1}, 32, rng), mul)[0],
              0U);
  }
}

TEST(MulProtocol, FixedPointWithTruncation) {
  Rng rng(5);
  const double xv = 1.5, yv = 2.0;
  const auto x = encode_fixed({&xv, 1}, {1}, 3, 32);
  const auto y = encode_fixed({&yv, 1}, {1}, 3, 32);
  auto [x0, x1] = share(x, rng, 3);
  auto [y0, y1] = share(y, rng, 3);
  auto r = run_two_party([&](Session& s) {
    const auto t = s.take_triple(TripleSpec::mul({1}, 32));
    const auto z = s.party() == 0 ? mul_protocol(s, x0, y0, t) : mul_protocol(s, x1, y1, t);
    EXPECT_EQ(z.precision(), 6);
    return truncate(z, 3);
  });
  EXPECT_NEAR(decode_fixed(reconstruct(r.out[0], r.out[1]), 3)[0], 3.0, 2e-3);
}

TEST(MulProtocol, ExactOnHundredInstances) {
  Rng rng(6);
  auto mul = [](Session& s, const AdditiveShare& x, const AdditiveShare& y,
                const TripleShare& t) { return mul_protocol(s, x, y, t); };
  for (int i = 0; i < 100; ++i) {
    const int n = i % 2 ? 64 : 32;
    const auto x = random_tensor({7}, n, rng), y = random_tensor({7}, n, rng);
    RunOptions opt;
    opt.dealer_seed = static_cast<std::uint64_t>(i);
    EXPECT_EQ(run_bilinear(TripleSpec::mul({7}, n), x, y, mul, opt), x * y);
  }
}

TEST(MatmulProtocol, ExamplesAndOracle) {
  auto mm = [](Session& s, const AdditiveShare& x, const AdditiveShare& y,
               const TripleShare& t) { return matmul_protocol(s, x, y, t); };
  const auto spec = TripleSpec::matmul(2, 2, 2, 32);
  const RingTensor a({2, 2}, 32, {1, 2, 3, 4});
  const RingTensor b({2, 2}, 32, {5, 6, 7, 8});
  EXPECT_EQ(run_bilinear(spec, a, b, mm).values(), (std::vector<std::uint64_t>{19, 22, 43, 50}));
  const RingTensor id({2, 2}, 32, {1, 0, 0, 1});
  EXPECT_EQ(run_bilinear(spec, id, b, mm), b);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_tensor({8, 8}, 64, rng), y = random_tensor({8, 8}, 64, rng);
    RunOptions opt;
    opt.dealer_seed = static_cast<std::uint64_t>(i);
    EXPECT_EQ(run_bilinear(TripleSpec::matmul(8, 8, 8, 64), x, y, mm, opt), naive_matmul(x, y));
  }
}

TEST(ConvProtocol, ExamplesAndOracle) {
  ConvGeometry g;
  g.height = g.width = 4;
  g.kernel = 2;
  g.stride = 2;
  auto conv = [&](Session& s, const AdditiveShare& x, const AdditiveShare& k,
                  const TripleShare& t) { return conv2d_protocol(s, x, k, t, t.spec.geometry); };
  std::vector<std::uint64_t> xs(16);
  for (std::uint64_t i = 0; i < 16; ++i) xs[i] = i;
  const RingTensor x({1, 1, 4, 4}, 32, xs);
  const RingTensor ones({1, 1, 2, 2}, 32, {1, 1, 1, 1});
  EXPECT_EQ(run_bilinear(TripleSpec::conv(g, 32), x, ones, conv).values(),
            (std::vector<std::uint64_t>{0 + 1 + 4 + 5, 2 + 3 + 6 + 7, 8 + 9 + 12 + 13,
                                        10 + 11 + 14 + 15}));
  const RingTensor delta({1, 1, 2, 2}, 32, {0, 0, 0, 1});
  EXPECT_EQ(run_bilinear(TripleSpec::conv(g, 32), x, delta, conv).values(),
            (std::vector<std::uint64_t>{5, 7, 13, 15}));

  Rng rng(8);
  ConvGeometry h;
  h.batch = 2;
  h.in_channels = 3;
  h.height = 6;
  h.width = 5;
  h.out_channels = 4;
  h.kernel = 3;
  h.stride = 2;
  h.padding = 1;
  for (int i = 0; i < 10; ++i) {
    const auto xi = random_tensor(h.input_shape(), 64, rng);
    const auto ki = random_tensor(h.kernel_shape(), 64, rng);
    EXPECT_EQ(run_bilinear(TripleSpec::conv(h, 64), xi, ki, conv), naive_conv(xi, ki, h));
  }
}

TEST(ConvProtocol, GeometryMismatch) {
  ConvGeometry g;
  g.height = g.width = 4;
  g.kernel = 2;
  ConvGeometry other = g;
  other.stride = 2;
  EXPECT_THROW(run_two_party([&](Session& s) {
                 const auto t = s.take_triple(TripleSpec::conv(g, 32));
                 AdditiveShare x(s.party(), RingTensor(g.input_shape(), 32));
                 AdditiveShare k(s.party(), RingTensor(g.kernel_shape(), 32));
                 return conv2d_protocol(s, x, k, t, other);
               }),
               std::invalid_argument);
}

TEST(Beaver, TripleReuseRejected) {
  EXPECT_THROW(run_two_party([](Session& s) {
                 const auto t = s.take_triple(TripleSpec::mul({2}, 32));
                 AdditiveShare x(s.party(), RingTensor({2}, 32));
                 mul_protocol(s, x, x, t);
                 return mul_protocol(s, x, x, t);
               }),
               KeyReuseError);
}

TEST(Beaver, ShapeMismatchRejected) {
  EXPECT_THROW(run_two_party([](Session& s) {
                 const auto t = s.take_triple(TripleSpec::mul({2}, 32));
                 AdditiveShare x(s.party(), RingTensor({3}, 32));
                 return mul_protocol(s, x, x, t);
               }),
               std::invalid_argument);
}

TEST(Beaver, BatchedJobsShareOneRound) {
  Rng rng(9);
  const auto x = random_tensor({3, 4}, 64, rng), y = random_tensor({4, 2}, 64, rng);
  const auto u = random_tensor({5}, 64, rng), v = random_tensor({5}, 64, rng);
  auto [x0, x1] = share(x, rng);
  auto [y0, y1] = share(y, rng);
  auto [u0, u1] = share(u, rng);
  auto [v0, v1] = share(v, rng);
  auto r = run_two_party([&](Session& s) {
    const auto t1 = s.take_triple(TripleSpec::matmul(3, 4, 2, 64));
    const auto t2 = s.take_triple(TripleSpec::mul({5}, 64));
    const bool p0 = s.party() == 0;
    const std::vector<BeaverJob> jobs{{p0 ? &x0 : &x1, p0 ? &y0 : &y1, &t1},
                                      {p0 ? &u0 : &u1, p0 ? &v0 : &v1, &t2}};
    return beaver_batch(s, jobs);
  });
  EXPECT_EQ(r.ledger[0].total().rounds, 1U);
  EXPECT_EQ(r.ledger[0].total().elements, 12U + 8 + 5 + 5);
  EXPECT_EQ(reconstruct(r.out[0][0], r.out[1][0]), naive_matmul(x, y));
  EXPECT_EQ(reconstruct(r.out[0][1], r.out[1][1]), u * v);
}

// The opened delta and epsilon are masked by fresh uniform a and b.
TEST(Beaver, OpenedValuesUniform) {
  Rng rng(10);
  const RingTensor x({512}, 64, std::vector<std::uint64_t>(512, 42));
  testutil::ByteHistogram h;
  for (int i = 0; i < 40; ++i) {
    const auto p = gen_triple(TripleSpec::mul({512}, 64), rng);
    const auto delta = x - (p.t0.a + p.t1.a);
    h.add(pack_ring(delta.data(), 64));
  }
  EXPECT_LT(h.chi_square(), testutil::kChi2Crit255);
}
