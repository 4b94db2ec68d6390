#include "ariann/reference.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "ariann/linalg.hpp"
#include "ariann/sharing.hpp"

namespace ariann {

FixedArith::T FixedArith::from_real(double v) const {
  return from_signed(encode_fixed_scalar(v, precision, n_bits), n_bits);
}

double FixedArith::to_real(T v) const { return decode_fixed_scalar(v, precision, n_bits); }

namespace {

std::uint64_t div_pow10(std::uint64_t v, int digits, int n_bits, FixedArith::Rounding r) {
  const std::int64_t d = pow10(digits);
  std::int64_t s = to_signed(v, n_bits);
  if (r == FixedArith::Rounding::kNearest) s += d / 2;
  std::int64_t q = s / d;
  if (s % d != 0 && s < 0) --q;
  return from_signed(q, n_bits);
}

}  // namespace

FixedArith::T FixedArith::rescale(T v) const { return div_pow10(v, precision, n_bits, rounding); }

FixedArith::T FixedArith::times(T v, double c) const {
  const int q = constant_precision(c, n_bits, precision);
  const T k = from_signed(encode_fixed_scalar(c, q, n_bits), n_bits);
  return div_pow10(mul(v, k), q, n_bits, rounding);
}

namespace {

// Gather maps for the layout kernels, read off the ring versions applied to
// 1-based position tensors (0 marks padding).
std::vector<std::size_t> position_map(const Shape& shape, const std::function<RingTensor(const RingTensor&)>& f) {
  std::vector<std::uint64_t> pos(shape_size(shape));
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i + 1;
  const RingTensor out = f(RingTensor(shape, 64, std::move(pos)));
  return {out.data().begin(), out.data().end()};
}

template <class A>
std::vector<typename A::T> gather(const A& a, std::span<const typename A::T> x, const std::vector<std::size_t>& map) {
  std::vector<typename A::T> out(map.size(), a.zero());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i]) out[i] = x[map[i] - 1];
  }
  return out;
}

template <class A>
std::vector<typename A::T> scatter_add(const A& a, std::span<const typename A::T> y, const std::vector<std::size_t>& map,
                           std::size_t size) {
  std::vector<typename A::T> out(size, a.zero());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i]) out[map[i] - 1] = a.add(out[map[i] - 1], y[i]);
  }
  return out;
}

// [m,k] x [k,n], optionally with either operand read transposed, rescaled.
template <class A>
std::vector<typename A::T> matmul_rescaled(const A& a, std::span<const typename A::T> x,
                                                std::span<const typename A::T> y, std::size_t m, std::size_t k,
                                                std::size_t n, bool tx, bool ty) {
  using T = typename A::T;
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = a.zero();
      for (std::size_t l = 0; l < k; ++l) {
        const T xv = tx ? x[l * m + i] : x[i * k + l];
        const T yv = ty ? y[j * k + l] : y[l * n + j];
        acc = a.add(acc, a.mul(xv, yv));
      }
      out[i * n + j] = a.rescale(acc);
    }
  }
  return out;
}

}  // namespace

template <class A>
RefNet<A>::RefNet(Architecture arch, const Params& params, A arith)
    : arch_(std::move(arch)), arith_(arith) {
  arch_.activation_shapes(1);
  set_params(params);
}

template <class A>
std::vector<typename A::T> RefNet<A>::encode(std::span<const double> v) const {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = arith_.from_real(v[i]);
  return out;
}

template <class A>
std::vector<double> RefNet<A>::decode(std::span<const T> v) const {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = arith_.to_real(v[i]);
  return out;
}

template <class A>
void RefNet<A>::set_params(const Params& p) {
  if (p.size() != arch_.layers.size()) throw std::invalid_argument("one parameter list per layer");
  params_.assign(p.size(), {});
  grads_.assign(p.size(), {});
  velocity_.assign(p.size(), {});
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto shapes = arch_.layers[i].param_shapes();
    if (p[i].size() != shapes.size()) throw std::invalid_argument(arch_.layer_tag(i) + ": wrong parameter count");
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      if (p[i][k].size() != shape_size(shapes[k])) throw std::invalid_argument(arch_.layer_tag(i) + ": size mismatch");
      params_[i].push_back(encode(p[i][k]));
      grads_[i].emplace_back(p[i][k].size(), arith_.zero());
      velocity_[i].emplace_back(p[i][k].size(), arith_.zero());
    }
  }
}

template <class A>
Params RefNet<A>::params() const {
  Params out(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (const auto& t : params_[i]) out[i].push_back(decode(t));
  }
  return out;
}

template <class A>
Params RefNet<A>::grads() const {
  Params out(grads_.size());
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    for (const auto& t : grads_[i]) out[i].push_back(decode(t));
  }
  return out;
}

template <class A>
std::vector<typename A::T> RefNet<A>::forward(std::span<const T> x, std::size_t batch) {
  const auto shapes = arch_.activation_shapes(batch);
  if (x.size() != shape_size(shapes[0])) throw std::invalid_argument("reference forward: input size mismatch");
  batch_ = batch;
  inputs_.assign(arch_.layers.size(), {});
  masks_.assign(arch_.layers.size(), {});
  std::vector<T> cur(x.begin(), x.end());
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    inputs_[i] = cur;
    switch (l.kind) {
      case LayerKind::kLinear: {
        auto y = matmul_rescaled<A>(arith_, cur, params_[i][0], batch, l.in, l.out, false, false);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < l.out; ++o) y[b * l.out + o] = arith_.add(y[b * l.out + o], params_[i][1][o]);
        }
        cur = std::move(y);
        break;
      }
      case LayerKind::kConv2d: {
        const ConvGeometry g = arch_.conv_geometry(i, batch);
        const auto umap = position_map(g.input_shape(), [&](const RingTensor& t) { return unroll(t, g); });
        const auto patches = gather<A>(arith_, cur, umap);
        // [rows, cols] x [O, cols]^T -> [rows, O]
        auto rows = matmul_rescaled<A>(arith_, patches, params_[i][0], g.patch_rows(), g.patch_cols(),
                                       l.out, false, true);
        const Shape rows_shape{g.patch_rows(), l.out};
        const auto cmap = position_map(rows_shape, [&](const RingTensor& t) { return channels_first(t, g); });
        auto y = gather<A>(arith_, rows, cmap);
        const std::size_t hw = g.out_height() * g.out_width();
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = arith_.add(y[j], params_[i][1][(j / hw) % l.out]);
        cur = std::move(y);
        break;
      }
      case LayerKind::kReLU: {
        masks_[i].resize(cur.size());
        for (std::size_t j = 0; j < cur.size(); ++j) {
          masks_[i][j] = arith_.positive(cur[j]);
          if (!masks_[i][j]) cur[j] = arith_.zero();
        }
        break;
      }
      case LayerKind::kMaxPool: {
        const Shape& in = shapes[i];
        ConvGeometry g;
        g.batch = in[0] * in[1];
        g.height = in[2];
        g.width = in[3];
        g.kernel = l.kernel;
        g.stride = l.stride;
        const Shape flat{g.batch, 1, g.height, g.width};
        const auto umap = position_map(flat, [&](const RingTensor& t) { return unroll(t, g); });
        const std::size_t kk = l.kernel * l.kernel;
        std::vector<T> y(umap.size() / kk);
        for (std::size_t w = 0; w < y.size(); ++w) {
          T best = cur[umap[w * kk] - 1];
          for (std::size_t j = 1; j < kk; ++j) {
            const T v = cur[umap[w * kk + j] - 1];
            if (arith_.positive(arith_.sub(v, best))) best = v;
          }
          y[w] = best;
        }
        cur = std::move(y);
        break;
      }
      case LayerKind::kFlatten:
        break;
    }
  }
  return cur;
}

template <class A>
void RefNet<A>::backward(std::span<const T> grad_out) {
  const auto shapes = arch_.activation_shapes(batch_);
  if (grad_out.size() != shape_size(shapes.back())) throw std::invalid_argument("reference backward: size mismatch");
  std::vector<T> g(grad_out.begin(), grad_out.end());
  const std::size_t batch = batch_;
  for (std::size_t ii = arch_.layers.size(); ii-- > 0;) {
    const LayerSpec& l = arch_.layers[ii];
    const auto& x = inputs_[ii];
    switch (l.kind) {
      case LayerKind::kLinear: {
        grads_[ii][0] = matmul_rescaled<A>(arith_, x, g, l.in, batch, l.out, true, false);
        std::vector<T> db(l.out, arith_.zero());
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < l.out; ++o) db[o] = arith_.add(db[o], g[b * l.out + o]);
        }
        grads_[ii][1] = std::move(db);
        if (ii > 0) g = matmul_rescaled<A>(arith_, g, params_[ii][0], batch, l.out, l.in, false, true);
        break;
      }
      case LayerKind::kConv2d: {
        const ConvGeometry geo = arch_.conv_geometry(ii, batch);
        const std::size_t rows = geo.patch_rows(), cols = geo.patch_cols();
        const auto lmap = position_map(geo.output_shape(), [&](const RingTensor& t) { return channels_last(t, geo); });
        const auto gl = gather<A>(arith_, g, lmap);  // [rows, O]
        const auto umap = position_map(geo.input_shape(), [&](const RingTensor& t) { return unroll(t, geo); });
        const auto patches = gather<A>(arith_, x, umap);  // [rows, cols]
        grads_[ii][0] = matmul_rescaled<A>(arith_, gl, patches, l.out, rows, cols, true, false);
        std::vector<T> db(l.out, arith_.zero());
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < l.out; ++o) db[o] = arith_.add(db[o], gl[r * l.out + o]);
        }
        grads_[ii][1] = std::move(db);
        if (ii > 0) {
          const auto dp = matmul_rescaled<A>(arith_, gl, params_[ii][0], rows, l.out, cols, false, false);
          g = scatter_add<A>(arith_, dp, umap, shape_size(geo.input_shape()));
        }
        break;
      }
      case LayerKind::kReLU:
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (!masks_[ii][j]) g[j] = arith_.zero();
        }
        break;
      case LayerKind::kFlatten:
        break;
      case LayerKind::kMaxPool:
        throw std::invalid_argument("max pooling has no backward pass");
    }
  }
}

template <class A>
void RefNet<A>::sgd_step(double lr, double momentum) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (std::size_t k = 0; k < params_[i].size(); ++k) {
      auto& v = velocity_[i][k];
      const auto& g = grads_[i][k];
      auto& p = params_[i][k];
      for (std::size_t j = 0; j < p.size(); ++j) {
        v[j] = momentum == 0.0 ? g[j] : arith_.add(arith_.times(v[j], momentum), g[j]);
        p[j] = arith_.sub(p[j], arith_.times(v[j], lr));
      }
    }
  }
}

template <class A>
std::vector<typename A::T> RefNet<A>::mse_grad(std::span<const T> pred, std::span<const T> target) const {
  if (pred.size() != target.size()) throw std::invalid_argument("mse_grad: size mismatch");
  std::vector<T> out(pred.size());
  const double c = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = arith_.times(arith_.sub(pred[i], target[i]), c);
  return out;
}

template <class A>
std::vector<double> train_reference(RefNet<A>& net, std::span<const double> x, std::span<const double> y,
                                    std::size_t n, const TrainConfig& cfg) {
  using T = typename A::T;
  const std::size_t in = shape_size(net.arch().input);
  const std::size_t out = net.arch().outputs();
  if (x.size() != n * in || y.size() != n * out) throw std::invalid_argument("train_reference: data size mismatch");
  const auto ex = net.encode(x);
  const auto ey = net.encode(y);
  std::vector<double> epoch_loss;
  for (const auto& epoch : batch_schedule(n, cfg)) {
    double total = 0;
    for (const auto& rows : epoch) {
      std::vector<T> xb, yb;
      std::vector<double> yd;
      for (std::size_t r : rows) {
        xb.insert(xb.end(), ex.begin() + static_cast<std::ptrdiff_t>(r * in),
                  ex.begin() + static_cast<std::ptrdiff_t>((r + 1) * in));
        yb.insert(yb.end(), ey.begin() + static_cast<std::ptrdiff_t>(r * out),
                  ey.begin() + static_cast<std::ptrdiff_t>((r + 1) * out));
      }
      const auto pred = net.forward(xb, rows.size());
      total += mse_loss(net.decode(pred), net.decode(yb));
      net.backward(net.mse_grad(pred, yb));
      net.sgd_step(cfg.lr, cfg.momentum);
    }
    epoch_loss.push_back(total / static_cast<double>(epoch.size()));
  }
  return epoch_loss;
}

template <class A>
std::vector<int> predict_labels(RefNet<A>& net, std::span<const double> x, std::size_t n, std::size_t chunk) {
  const std::size_t in = shape_size(net.arch().input);
  const std::size_t out = net.arch().outputs();
  std::vector<int> labels;
  for (std::size_t b = 0; b < n; b += chunk) {
    const std::size_t m = std::min(chunk, n - b);
    const auto ex = net.encode(x.subspan(b * in, m * in));
    const auto y = net.decode(net.forward(ex, m));
    for (std::size_t r = 0; r < m; ++r) {
      if (out == 1) {
        labels.push_back(y[r] > 0.5 ? 1 : 0);
        continue;
      }
      std::size_t best = 0;
      for (std::size_t j = 1; j < out; ++j) {
        if (y[r * out + j] > y[r * out + best]) best = j;
      }
      labels.push_back(static_cast<int>(best));
    }
  }
  return labels;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw std::invalid_argument("mse_loss: size mismatch");
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

std::vector<int> labels_from_onehot(std::span<const double> onehot, std::size_t rows) {
  if (rows == 0 || onehot.size() % rows != 0) throw std::invalid_argument("labels_from_onehot: bad size");
  const std::size_t m = onehot.size() / rows;
  std::vector<int> out(rows, -1);
  for (std::size_t r = 0; r < rows; ++r) {
    if (m == 1) {
      out[r] = onehot[r] == 1.0 ? 1 : (onehot[r] == 0.0 ? 0 : -1);
      continue;
    }
    int ones = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = onehot[r * m + j];
      if (v == 1.0) {
        ++ones;
        out[r] = static_cast<int>(j);
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) out[r] = -1;
  }
  return out;
}

template class RefNet<FloatArith>;
template class RefNet<FixedArith>;
template std::vector<double> train_reference(RefNet<FloatArith>&, std::span<const double>, std::span<const double>,
                                             std::size_t, const TrainConfig&);
template std::vector<double> train_reference(RefNet<FixedArith>&, std::span<const double>, std::span<const double>,
                                             std::size_t, const TrainConfig&);
template std::vector<int> predict_labels(RefNet<FloatArith>&, std::span<const double>, std::size_t, std::size_t);
template std::vector<int> predict_labels(RefNet<FixedArith>&, std::span<const double>, std::size_t, std::size_t);

}  // namespace ariann
