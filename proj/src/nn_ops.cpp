#include "ariann/nn_ops.hpp"

#include <cmath>
#include <numeric>

#include "ariann/beaver.hpp"
#include "ariann/fss_protocol.hpp"
#include "ariann/linalg.hpp"
#include "ariann/session.hpp"

namespace ariann {
namespace {

AdditiveShare from_words(const AdditiveShare& like, Shape shape, std::vector<std::uint64_t> v,
                         int precision) {
  return {like.party(), RingTensor::wrap(std::move(shape), like.n_bits(), std::move(v)), precision};
}

AdditiveShare flat(const AdditiveShare& x) { return x.reshaped({x.size()}); }

std::size_t last_dim(const AdditiveShare& x) {
  if (x.shape().empty()) throw std::invalid_argument("expected at least one axis");
  return x.shape().back();
}

// 1[x > 0] = 1 - 1[x <= 0]
AdditiveShare positive(Session& s, const AdditiveShare& x, int fss_bits) {
  const auto keys = s.take_cmp(x.size(), fss_bits, x.n_bits());
  const auto le = sign_protocol(s, flat(x.with_precision(0)), keys);
  return public_minus(RingTensor::scalar(1, x.n_bits()), le).reshaped(x.shape());
}

struct TieParams {
  std::uint64_t scale;
  int fss_bits;
};

// The threshold r = floor(U * T / L), U uniform in [0, L), is exactly uniform
// on [0, T) whenever T divides L, so L = lcm(1..m) when it fits. The
// comparison inputs reach L * m in magnitude; the domain is widened so the
// sign test's wrap probability stays below 2^-20.
TieParams tie_params(std::size_t m, int fss_bits) {
  std::uint64_t l = 1;
  for (std::uint64_t i = 2; i <= m; ++i) {
    l = std::lcm(l, i);
    if (l > (1ULL << 40)) break;
  }
  if (l > (1ULL << 40)) l = 1ULL << 20;  // approximately uniform fallback
  const double span = static_cast<double>(l) * static_cast<double>(m);
  const int need = static_cast<int>(std::ceil(std::log2(span))) + 21;
  return {l, std::min(64, std::max(fss_bits, need))};
}

}  // namespace

AdditiveShare sum_last_axis(const AdditiveShare& x) {
  const std::size_t m = last_dim(x);
  const std::size_t rows = x.size() / m;
  std::vector<std::uint64_t> out(rows, 0);
  const auto v = x.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < m; ++i) out[r] += v[r * m + i];
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  if (shape.empty()) shape = {1};
  return from_words(x, shape, std::move(out), x.precision());
}

AdditiveShare concat_flat(const AdditiveShare& a, const AdditiveShare& b) {
  if (a.party() != b.party() || a.n_bits() != b.n_bits() || a.precision() != b.precision()) {
    throw std::invalid_argument("concat: incompatible shares");
  }
  std::vector<std::uint64_t> v(a.values().values());
  v.insert(v.end(), b.values().data().begin(), b.values().data().end());
  return from_words(a, {a.size() + b.size()}, std::move(v), a.precision());
}

// ---------------------------------------------------------------------------
// Plans

PrepPlan relu_plan(std::size_t m, int ring_bits, int fss_bits, const std::string& tag) {
  return {PrepRequest::cmp(m, fss_bits, ring_bits, tag),
          PrepRequest::beaver(TripleSpec::mul({m}, ring_bits), tag)};
}

PrepPlan argmax_plan(std::size_t rows, std::size_t m, int ring_bits, int fss_bits,
                     const std::string& tag) {
  return {PrepRequest::cmp(rows * m * (m - 1), fss_bits, ring_bits, tag),
          PrepRequest::eq(rows * m, fss_bits, ring_bits, tag)};
}

PrepPlan break_ties_plan(std::size_t rows, std::size_t m, int ring_bits, int fss_bits,
                         const std::string& tag) {
  return {PrepRequest::cmp(rows * m, tie_params(m, fss_bits).fss_bits, ring_bits, tag)};
}

namespace {

ConvGeometry pool_geometry(const Shape& x, std::size_t k, std::size_t stride) {
  if (x.size() != 4) throw std::invalid_argument("max pooling expects [B,C,H,W], got " + shape_string(x));
  ConvGeometry g;
  g.batch = x[0] * x[1];
  g.in_channels = 1;
  g.height = x[2];
  g.width = x[3];
  g.out_channels = 1;
  g.kernel = k;
  g.stride = stride;
  g.padding = 0;
  g.validate();
  return g;
}

}  // namespace

PrepPlan maxpool_plan(const Shape& x_shape, std::size_t k, std::size_t stride, int ring_bits,
                      int fss_bits, const std::string& tag) {
  const ConvGeometry g = pool_geometry(x_shape, k, stride);
  const std::size_t windows = g.patch_rows();
  PrepPlan plan = argmax_plan(windows, k * k, ring_bits, fss_bits, tag);
  plan.push_back(PrepRequest::beaver(TripleSpec::mul({windows, k * k}, ring_bits), tag));
  return plan;
}

PrepPlan maxpool_k2_plan(const Shape& x_shape, std::size_t stride, int ring_bits, int fss_bits,
                         const std::string& tag) {
  const std::size_t windows = pool_geometry(x_shape, 2, stride).patch_rows();
  PrepPlan plan = relu_plan(2 * windows, ring_bits, fss_bits, tag);
  const PrepPlan second = relu_plan(windows, ring_bits, fss_bits, tag);
  plan.insert(plan.end(), second.begin(), second.end());
  return plan;
}

// ---------------------------------------------------------------------------
// Protocols

ReluOutput relu_with_mask(Session& s, const AdditiveShare& x, int fss_bits) {
  auto op = s.op("relu");
  AdditiveShare b = positive(s, x, fss_bits);
  const auto t = s.take_triple(TripleSpec::mul({x.size()}, x.n_bits()));
  AdditiveShare y = mul_protocol(s, flat(b), flat(x), t);
  return {y.reshaped(x.shape()), std::move(b)};
}

AdditiveShare relu(Session& s, const AdditiveShare& x, int fss_bits) {
  return relu_with_mask(s, x, fss_bits).y;
}

AdditiveShare argmax(Session& s, const AdditiveShare& x, int fss_bits) {
  auto op = s.op("argmax");
  const std::size_t m = last_dim(x);
  if (m < 2) throw std::invalid_argument("argmax needs at least 2 entries");
  const std::size_t rows = x.size() / m;
  const auto v = x.values().data();
  // d[r][j][i'] = x_i - x_j over i != j
  std::vector<std::uint64_t> d;
  d.reserve(rows * m * (m - 1));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        if (i != j) d.push_back(v[r * m + i] - v[r * m + j]);
      }
    }
  }
  const AdditiveShare diffs = from_words(x, {rows * m, m - 1}, std::move(d), 0);
  const auto keys = s.take_cmp(diffs.size(), fss_bits, x.n_bits());
  const AdditiveShare le = sign_protocol(s, diffs, keys);
  // s_j = #{i != j : x_i <= x_j}; x_j is a maximum iff s_j == m - 1.
  const AdditiveShare votes = sum_last_axis(le);
  const AdditiveShare gap =
      sub_public(votes, RingTensor::scalar(static_cast<std::uint64_t>(m - 1), x.n_bits()));
  const auto eq = s.take_eq(gap.size(), fss_bits, x.n_bits());
  return equal_zero_protocol(s, gap, eq).reshaped(x.shape());
}

AdditiveShare break_ties(Session& s, const AdditiveShare& delta, int fss_bits) {
  auto op = s.op("break_ties");
  const std::size_t m = last_dim(delta);
  const std::size_t rows = delta.size() / m;
  const TieParams tp = tie_params(m, fss_bits);
  const auto v = delta.values().data();
  std::vector<std::uint64_t> z(delta.size());
  for (std::size_t r = 0; r < rows; ++r) {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < m; ++i) total += v[r * m + i];
    const std::uint64_t u = s.public_uniform(tp.scale);
    std::uint64_t cum = 0;
    for (std::size_t k = 0; k < m; ++k) {
      cum += v[r * m + k];
      // L * cumsum_k - U * T; positive iff cumsum_k > floor(U * T / L)
      z[r * m + k] = tp.scale * cum - u * total;
    }
  }
  const AdditiveShare zs = from_words(delta, {delta.size()}, std::move(z), 0);
  const auto keys = s.take_cmp(zs.size(), tp.fss_bits, delta.n_bits());
  const AdditiveShare le = sign_protocol(s, zs, keys);
  const auto c = public_minus(RingTensor::scalar(1, delta.n_bits()), le);
  std::vector<std::uint64_t> out(delta.size());
  const auto cv = c.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < m; ++k) {
      out[r * m + k] = cv[r * m + k] - (k == 0 ? 0 : cv[r * m + k - 1]);
    }
  }
  return from_words(delta, delta.shape(), std::move(out), 0);
}

AdditiveShare maxpool(Session& s, const AdditiveShare& x, std::size_t k, std::size_t stride,
                      int fss_bits) {
  auto op = s.op("maxpool");
  const Shape& xs = x.shape();
  const ConvGeometry g = pool_geometry(xs, k, stride);
  const std::size_t kk = k * k;
  const RingTensor windows = unroll(x.values().reshaped(g.input_shape()), g);
  const AdditiveShare w(x.party(), windows, x.precision());
  // Scale by k^2 and add the in-window index so no two entries tie; the
  // order of distinct entries is unchanged.
  std::vector<std::uint64_t> idx(windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i % kk;
  const AdditiveShare z = add_public(scale(w, static_cast<std::int64_t>(kk)),
                                     RingTensor(windows.shape(), x.n_bits(), std::move(idx)));
  const AdditiveShare hot = argmax(s, z, fss_bits);
  const auto t = s.take_triple(TripleSpec::mul(windows.shape(), x.n_bits()));
  const AdditiveShare picked = mul_protocol(s, hot, w, t);
  return sum_last_axis(picked).reshaped({xs[0], xs[1], g.out_height(), g.out_width()});
}

AdditiveShare maxpool_k2(Session& s, const AdditiveShare& x, std::size_t stride, int fss_bits) {
  auto op = s.op("maxpool_k2");
  const Shape& xs = x.shape();
  const ConvGeometry g = pool_geometry(xs, 2, stride);
  const RingTensor windows = unroll(x.values().reshaped(g.input_shape()), g);
  const std::size_t n = g.patch_rows();
  auto column = [&](std::size_t c) {
    std::vector<std::uint64_t> v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = windows[r * 4 + c];
    return from_words(x, {n}, std::move(v), x.precision());
  };
  const AdditiveShare w0 = column(0), w1 = column(1), w2 = column(2), w3 = column(3);
  const AdditiveShare r1 = relu(s, concat_flat(w0 - w1, w2 - w3), fss_bits);
  const auto rv = r1.values().data();
  const AdditiveShare m1 = w1 + from_words(x, {n}, {rv.begin(), rv.begin() + n}, x.precision());
  const AdditiveShare m2 = w3 + from_words(x, {n}, {rv.begin() + n, rv.end()}, x.precision());
  const AdditiveShare top = m2 + relu(s, m1 - m2, fss_bits);
  return top.reshaped({xs[0], xs[1], g.out_height(), g.out_width()});
}

AdditiveShare mul_fixed(Session& s, const AdditiveShare& x, const AdditiveShare& y) {
  if (x.shape() != y.shape()) throw std::invalid_argument("mul_fixed: shape mismatch");
  const auto t = s.take_triple(TripleSpec::mul({x.size()}, x.n_bits()));
  const AdditiveShare z = mul_protocol(s, flat(x), flat(y), t);
  return truncate(z, y.precision()).reshaped(x.shape());
}

AdditiveShare inv_sqrt_newton(Session& s, const AdditiveShare& v, const AdditiveShare& theta0,
                              int iters, int C) {
  if (iters < 1) throw std::invalid_argument("inv_sqrt_newton needs at least one iteration");
  if (C < 1) throw std::invalid_argument("inv_sqrt_newton needs C >= 1");
  check_compatible(v, theta0);
  auto op = s.op("inv_sqrt");
  const int p = v.precision();
  const int n = v.n_bits();
  const RingTensor c_plus_1 = RingTensor::scalar(
      from_signed(static_cast<std::int64_t>(C + 1) * pow10(p), n), n);
  AdditiveShare theta = theta0;
  for (int i = 0; i < iters; ++i) {
    const AdditiveShare vt = mul_fixed(s, v, theta);
    const AdditiveShare vt2 = mul_fixed(s, vt, theta);
    const AdditiveShare inner = div_public(public_minus(c_plus_1, vt2), C);
    theta = mul_fixed(s, theta, inner);
  }
  return theta;
}

AdditiveShare inv_sqrt_newton(Session& s, const AdditiveShare& v, double theta0, int iters, int C) {
  const std::int64_t t = encode_fixed_scalar(theta0, v.precision(), v.n_bits());
  const RingTensor init(v.shape(), v.n_bits(),
                        std::vector<std::uint64_t>(v.size(), from_signed(t, v.n_bits())));
  return inv_sqrt_newton(s, v, public_share(v.party(), init, v.precision()), iters, C);
}

PrepPlan inv_sqrt_plan(std::size_t m, int ring_bits, int iters, const std::string& tag) {
  PrepPlan plan;
  for (int i = 0; i < 3 * iters; ++i) {
    plan.push_back(PrepRequest::beaver(TripleSpec::mul({m}, ring_bits), tag));
  }
  return plan;
}

AdditiveShare batchnorm_forward(Session& s, const AdditiveShare& x, const AdditiveShare& gamma,
                                const AdditiveShare& beta, BatchNormState& state,
                                const BatchNormPolicy& policy) {
  if (x.shape().size() != 2 || x.shape()[0] == 0) {
    throw std::invalid_argument("batchnorm expects a non-empty [B, F] batch");
  }
  const std::size_t b = x.shape()[0], f = x.shape()[1];
  if (gamma.shape() != Shape{f} || beta.shape() != Shape{f}) {
    throw std::invalid_argument("batchnorm: gamma and beta must be [F]");
  }
  auto op = s.op("batchnorm");
  const int p = x.precision();
  const int n = x.n_bits();
  auto enc = [&](double v) { return RingTensor::scalar(from_signed(encode_fixed_scalar(v, p, n), n), n); };
  auto mean_rows = [&](const AdditiveShare& t) {
    return div_public(AdditiveShare(t.party(), sum_leading(t.values()), p), static_cast<double>(b));
  };
  auto broadcast = [&](const AdditiveShare& row) {
    return AdditiveShare(row.party(), add_rows(RingTensor({b, f}, n), row.values()), p);
  };
  const AdditiveShare mu = mean_rows(x);
  const AdditiveShare d = x - broadcast(mu);
  const AdditiveShare var = add_public(mean_rows(mul_fixed(s, d, d)), enc(policy.eps));
  const bool warm = policy.warm_start && state.theta.has_value();
  const int iters = warm ? policy.warm_iters : policy.cold_iters;
  const AdditiveShare theta = warm ? inv_sqrt_newton(s, var, *state.theta, iters, policy.C)
                                   : inv_sqrt_newton(s, var, policy.theta0, iters, policy.C);
  state.theta = theta;
  const AdditiveShare g_theta = mul_fixed(s, gamma, theta);
  return mul_fixed(s, d, broadcast(g_theta)) + broadcast(beta);
}

PrepPlan batchnorm_plan(std::size_t batch, std::size_t features, int ring_bits, int iters,
                        const std::string& tag) {
  PrepPlan plan{PrepRequest::beaver(TripleSpec::mul({batch * features}, ring_bits), tag)};
  const PrepPlan newton = inv_sqrt_plan(features, ring_bits, iters, tag);
  plan.insert(plan.end(), newton.begin(), newton.end());
  plan.push_back(PrepRequest::beaver(TripleSpec::mul({features}, ring_bits), tag));
  plan.push_back(PrepRequest::beaver(TripleSpec::mul({batch * features}, ring_bits), tag));
  return plan;
}

}  // namespace ariann
