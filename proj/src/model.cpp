#include "ariann/model.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ariann/beaver.hpp"
#include "ariann/fss_protocol.hpp"
#include "ariann/key_io.hpp"
#include "ariann/linalg.hpp"
#include "ariann/session.hpp"

namespace ariann {

// ---------------------------------------------------------------------------
// Architecture

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::kLinear;
  l.in = in;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.in = in_ch;
  l.out = out_ch;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

LayerSpec LayerSpec::relu() { return {}; }

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  return l;
}

LayerSpec LayerSpec::maxpool(std::size_t kernel, std::size_t stride) {
  LayerSpec l;
  l.kind = LayerKind::kMaxPool;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

std::string LayerSpec::name() const {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv2d: return "conv";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kMaxPool: return "maxpool";
  }
  return "?";
}

std::vector<Shape> LayerSpec::param_shapes() const {
  if (kind == LayerKind::kLinear) return {{in, out}, {out}};
  if (kind == LayerKind::kConv2d) return {{out, in, kernel, kernel}, {out}};
  return {};
}

std::vector<Shape> Architecture::activation_shapes(std::size_t batch) const {
  std::vector<Shape> out;
  Shape cur = input;
  cur.insert(cur.begin(), batch);
  out.push_back(cur);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    auto bad = [&](const std::string& why) {
      return std::invalid_argument(layer_tag(i) + ": " + why + " (input " + shape_string(cur) + ")");
    };
    switch (l.kind) {
      case LayerKind::kLinear:
        if (cur.size() != 2 || cur[1] != l.in) throw bad("expects [B, " + std::to_string(l.in) + "]");
        cur = {batch, l.out};
        break;
      case LayerKind::kConv2d: {
        if (cur.size() != 4 || cur[1] != l.in) throw bad("expects [B, " + std::to_string(l.in) + ", H, W]");
        const ConvGeometry g = conv_geometry(i, batch);
        cur = g.output_shape();
        break;
      }
      case LayerKind::kMaxPool: {
        if (cur.size() != 4) throw bad("expects [B, C, H, W]");
        if (l.kernel == 0 || l.stride == 0 || l.kernel > cur[2] || l.kernel > cur[3]) {
          throw bad("bad pooling window");
        }
        cur = {batch, cur[1], (cur[2] - l.kernel) / l.stride + 1, (cur[3] - l.kernel) / l.stride + 1};
        break;
      }
      case LayerKind::kFlatten:
        cur = {batch, shape_size(cur) / batch};
        break;
      case LayerKind::kReLU:
        break;
    }
    out.push_back(cur);
  }
  return out;
}

std::size_t Architecture::outputs() const {
  const Shape last = activation_shapes(1).back();
  return shape_size(last);
}

std::string Architecture::layer_tag(std::size_t i) const { return layers.at(i).name() + std::to_string(i); }

ConvGeometry Architecture::conv_geometry(std::size_t i, std::size_t batch) const {
  const LayerSpec& l = layers.at(i);
  if (l.kind != LayerKind::kConv2d) throw std::invalid_argument(layer_tag(i) + " is not a convolution");
  // Input shape of layer i without recursing through activation_shapes(i).
  Shape cur = input;
  for (std::size_t j = 0; j < i; ++j) {
    const LayerSpec& p = layers[j];
    if (p.kind == LayerKind::kLinear) cur = {p.out};
    if (p.kind == LayerKind::kFlatten) cur = {shape_size(cur)};
    if (p.kind == LayerKind::kConv2d) {
      const ConvGeometry g = conv_geometry(j, 1);
      cur = {g.out_channels, g.out_height(), g.out_width()};
    }
    if (p.kind == LayerKind::kMaxPool && cur.size() == 3) {
      cur = {cur[0], (cur[1] - p.kernel) / p.stride + 1, (cur[2] - p.kernel) / p.stride + 1};
    }
  }
  if (cur.size() != 3) throw std::invalid_argument(layer_tag(i) + " expects a [C, H, W] sample");
  ConvGeometry g;
  g.batch = batch;
  g.in_channels = l.in;
  g.height = cur[1];
  g.width = cur[2];
  g.out_channels = l.out;
  g.kernel = l.kernel;
  g.stride = l.stride;
  g.padding = l.padding;
  g.validate();
  return g;
}

std::string Architecture::describe() const {
  std::string s = "input " + shape_string(input);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    s += " | " + layer_tag(i);
    if (l.kind == LayerKind::kLinear) s += " " + std::to_string(l.in) + "->" + std::to_string(l.out);
    if (l.kind == LayerKind::kConv2d) {
      s += " " + std::to_string(l.in) + "->" + std::to_string(l.out) + " k" + std::to_string(l.kernel);
    }
    if (l.kind == LayerKind::kMaxPool) s += " k" + std::to_string(l.kernel);
  }
  return s;
}

Architecture Architecture::mlp(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw std::invalid_argument("an MLP needs at least two widths");
  Architecture a;
  a.input = {widths[0]};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (i > 0) a.layers.push_back(LayerSpec::relu());
    a.layers.push_back(LayerSpec::linear(widths[i], widths[i + 1]));
  }
  return a;
}

Architecture Architecture::network1() { return mlp({784, 128, 128, 10}); }

Architecture Architecture::network2() {
  Architecture a;
  a.input = {1, 28, 28};
  // ReLU after MaxPool: same output, fewer comparisons.
  a.layers = {LayerSpec::conv2d(1, 16, 5), LayerSpec::maxpool(2, 2), LayerSpec::relu(),
              LayerSpec::conv2d(16, 16, 5), LayerSpec::maxpool(2, 2), LayerSpec::relu(),
              LayerSpec::flatten(), LayerSpec::linear(256, 100), LayerSpec::relu(),
              LayerSpec::linear(100, 10)};
  return a;
}

Params init_params(const Architecture& arch, std::uint64_t seed) {
  arch.activation_shapes(1);
  std::mt19937_64 gen(seed);
  Params p(arch.layers.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const auto shapes = l.param_shapes();
    if (shapes.empty()) continue;
    const std::size_t fan_in = l.kind == LayerKind::kLinear ? l.in : l.in * l.kernel * l.kernel;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<double> w(shape_size(shapes[0]));
    for (auto& v : w) v = u(gen);
    p[i] = {std::move(w), std::vector<double>(shape_size(shapes[1]), 0.0)};
  }
  return p;
}

// ---------------------------------------------------------------------------
// Shares of a model

namespace {

std::vector<std::vector<AdditiveShare>> zeros_like(const std::vector<std::vector<AdditiveShare>>& p) {
  std::vector<std::vector<AdditiveShare>> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (const auto& t : p[i]) {
      out[i].emplace_back(t.party(), RingTensor(t.shape(), t.n_bits()), t.precision());
    }
  }
  return out;
}

}  // namespace

PrivateModel::PrivateModel(Architecture arch, FixedFormat fmt, int party,
                           std::vector<std::vector<AdditiveShare>> params)
    : arch_(std::move(arch)), fmt_(fmt), party_(party), params_(std::move(params)) {
  if (params_.size() != arch_.layers.size()) throw std::invalid_argument("one parameter list per layer");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto shapes = arch_.layers[i].param_shapes();
    if (params_[i].size() != shapes.size()) {
      throw std::invalid_argument(arch_.layer_tag(i) + ": wrong parameter count");
    }
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const AdditiveShare& t = params_[i][k];
      if (t.shape() != shapes[k] || t.party() != party_ || t.precision() != fmt_.precision ||
          t.n_bits() != fmt_.n_bits) {
        throw std::invalid_argument(arch_.layer_tag(i) + ": parameter share does not match the layer");
      }
    }
  }
  grads_ = zeros_like(params_);
  velocity_ = zeros_like(params_);
}

ModelPair share_model(const Architecture& arch, const Params& params, const FixedFormat& fmt, Rng& rng) {
  if (params.size() != arch.layers.size()) throw std::invalid_argument("one parameter list per layer");
  std::vector<std::vector<AdditiveShare>> p0(params.size()), p1(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto shapes = arch.layers[i].param_shapes();
    if (params[i].size() != shapes.size()) throw std::invalid_argument(arch.layer_tag(i) + ": wrong parameter count");
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      if (params[i][k].size() != shape_size(shapes[k])) {
        throw std::invalid_argument(arch.layer_tag(i) + ": parameter size mismatch");
      }
      auto [a, b] = share(encode_fixed(params[i][k], shapes[k], fmt.precision, fmt.n_bits), rng, fmt.precision);
      p0[i].push_back(std::move(a));
      p1[i].push_back(std::move(b));
    }
  }
  return {PrivateModel(arch, fmt, 0, std::move(p0)), PrivateModel(arch, fmt, 1, std::move(p1))};
}

Params reconstruct_model(const PrivateModel& m0, const PrivateModel& m1) {
  Params out(m0.params().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < m0.params()[i].size(); ++k) {
      out[i].push_back(decode_fixed(reconstruct(m0.params()[i][k], m1.params()[i][k]), m0.format().precision));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

AdditiveShare wrap_like(const AdditiveShare& like, RingTensor v, int precision) {
  return {like.party(), std::move(v), precision};
}

void check_input(const PrivateModel& m, const AdditiveShare& x) {
  if (x.party() != m.party()) throw std::invalid_argument("input share belongs to the other party");
  if (x.precision() != m.format().precision || x.n_bits() != m.format().n_bits) {
    throw std::invalid_argument("input precision or ring differs from the model's");
  }
  if (x.shape().empty()) throw std::invalid_argument("input needs a batch axis");
  Shape want = m.arch().input;
  want.insert(want.begin(), x.shape()[0]);
  if (x.shape() != want) {
    throw std::invalid_argument("input shape " + shape_string(x.shape()) + ", model expects " +
                                shape_string(want));
  }
}

}  // namespace

ForwardResult forward(Session& s, const PrivateModel& model, const AdditiveShare& x) {
  check_input(model, x);
  const Architecture& arch = model.arch();
  const FixedFormat& fmt = model.format();
  const std::size_t batch = x.shape()[0];
  ForwardResult r;
  r.tape.batch = batch;
  r.tape.masks.resize(arch.layers.size());
  AdditiveShare cur = x;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const auto& p = model.params()[i];
    auto op = s.op(arch.layer_tag(i));
    r.tape.inputs.push_back(cur);
    switch (l.kind) {
      case LayerKind::kLinear: {
        const auto t = s.take_triple(TripleSpec::matmul(batch, l.in, l.out, fmt.n_bits));
        const AdditiveShare z = truncate(matmul_protocol(s, cur, p[0], t), fmt.precision);
        cur = wrap_like(z, add_rows(z.values(), p[1].values()), fmt.precision);
        break;
      }
      case LayerKind::kConv2d: {
        const ConvGeometry g = arch.conv_geometry(i, batch);
        const auto t = s.take_triple(TripleSpec::conv(g, fmt.n_bits));
        const AdditiveShare z = truncate(conv2d_protocol(s, cur, p[0], t, g), fmt.precision);
        cur = wrap_like(z, add_channels(z.values(), p[1].values()), fmt.precision);
        break;
      }
      case LayerKind::kReLU: {
        ReluOutput o = relu_with_mask(s, cur, fmt.fss_bits);
        cur = std::move(o.y);
        r.tape.masks[i] = std::move(o.mask);
        break;
      }
      case LayerKind::kFlatten:
        cur = cur.reshaped({batch, cur.size() / batch});
        break;
      case LayerKind::kMaxPool:
        cur = l.kernel == 2 ? maxpool_k2(s, cur, l.stride, fmt.fss_bits)
                            : maxpool(s, cur, l.kernel, l.stride, fmt.fss_bits);
        break;
    }
  }
  r.y = std::move(cur);
  return r;
}

void backward(Session& s, PrivateModel& model, Tape& tape, const AdditiveShare& grad_out) {
  if (tape.consumed) throw std::logic_error("stale tape: backward already ran on it");
  const Architecture& arch = model.arch();
  const FixedFormat& fmt = model.format();
  const std::size_t batch = tape.batch;
  if (tape.inputs.size() != arch.layers.size()) throw std::invalid_argument("tape does not match the model");
  const auto shapes = arch.activation_shapes(batch);
  if (grad_out.shape() != shapes.back()) {
    throw std::invalid_argument("output gradient shape " + shape_string(grad_out.shape()) + ", expected " +
                                shape_string(shapes.back()));
  }
  tape.consumed = true;
  AdditiveShare g = grad_out;
  for (std::size_t ii = arch.layers.size(); ii-- > 0;) {
    const LayerSpec& l = arch.layers[ii];
    const bool need_dx = ii > 0;
    const AdditiveShare& x = tape.inputs[ii];
    auto op = s.op(arch.layer_tag(ii) + ".grad");
    switch (l.kind) {
      case LayerKind::kLinear: {
        const AdditiveShare xt = wrap_like(x, transpose(x.values()), x.precision());
        const AdditiveShare wt = wrap_like(x, transpose(model.params()[ii][0].values()), fmt.precision);
        const auto t_dw = s.take_triple(TripleSpec::matmul(l.in, batch, l.out, fmt.n_bits));
        std::vector<BeaverJob> jobs{{&xt, &g, &t_dw}};
        TripleShare t_dx;
        if (need_dx) {
          t_dx = s.take_triple(TripleSpec::matmul(batch, l.out, l.in, fmt.n_bits));
          jobs.push_back({&g, &wt, &t_dx});
        }
        auto out = beaver_batch(s, jobs);
        model.grads()[ii][0] = truncate(out[0], fmt.precision);
        model.grads()[ii][1] = wrap_like(g, sum_leading(g.values()), fmt.precision);
        if (need_dx) g = truncate(out[1], fmt.precision);
        break;
      }
      case LayerKind::kConv2d: {
        const ConvGeometry geo = arch.conv_geometry(ii, batch);
        const std::size_t rows = geo.patch_rows(), cols = geo.patch_cols();
        const AdditiveShare gl = wrap_like(g, channels_last(g.values(), geo), fmt.precision);  // [rows, O]
        const AdditiveShare glt = wrap_like(g, transpose(gl.values()), fmt.precision);         // [O, rows]
        const AdditiveShare patches = wrap_like(x, unroll(x.values(), geo), fmt.precision);    // [rows, cols]
        const AdditiveShare kflat = model.params()[ii][0].reshaped({l.out, cols});
        const auto t_dk = s.take_triple(TripleSpec::matmul(l.out, rows, cols, fmt.n_bits));
        std::vector<BeaverJob> jobs{{&glt, &patches, &t_dk}};
        TripleShare t_dx;
        if (need_dx) {
          t_dx = s.take_triple(TripleSpec::matmul(rows, l.out, cols, fmt.n_bits));
          jobs.push_back({&gl, &kflat, &t_dx});
        }
        auto out = beaver_batch(s, jobs);
        model.grads()[ii][0] = truncate(out[0], fmt.precision).reshaped(geo.kernel_shape());
        model.grads()[ii][1] = wrap_like(g, sum_channels(g.values()), fmt.precision);
        if (need_dx) {
          const AdditiveShare dp = truncate(out[1], fmt.precision);
          g = wrap_like(g, fold(dp.values(), geo), fmt.precision);
        }
        break;
      }
      case LayerKind::kReLU: {
        if (!need_dx) break;
        const AdditiveShare& mask = tape.masks[ii];
        const auto t = s.take_triple(TripleSpec::mul({g.size()}, fmt.n_bits));
        g = mul_protocol(s, mask.reshaped({g.size()}), g.reshaped({g.size()}), t).reshaped(x.shape());
        break;
      }
      case LayerKind::kFlatten:
        g = g.reshaped(x.shape());
        break;
      case LayerKind::kMaxPool:
        throw std::invalid_argument("max pooling has no private backward pass");
    }
  }
}

void sgd_step(PrivateModel& model, double lr, double momentum) {
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    for (std::size_t k = 0; k < model.params()[i].size(); ++k) {
      AdditiveShare& v = model.velocity()[i][k];
      const AdditiveShare& g = model.grads()[i][k];
      v = momentum == 0.0 ? g : mul_public_scalar(v, momentum) + g;
      model.params()[i][k] = model.params()[i][k] - mul_public_scalar(v, lr);
    }
  }
}

AdditiveShare mse_grad(const AdditiveShare& y_pred, const AdditiveShare& y_true) {
  check_compatible(y_pred, y_true);
  return mul_public_scalar(y_pred - y_true, 2.0 / static_cast<double>(y_pred.size()));
}

AdditiveShare predict(Session& s, const PrivateModel& model, const AdditiveShare& x) {
  const AdditiveShare y = forward(s, model, x).y;
  if (y.shape().back() > 1) return argmax(s, y, model.format().fss_bits);
  auto op = s.op("threshold");
  const int p = model.format().precision;
  const RingTensor half = RingTensor::scalar(
      from_signed(encode_fixed_scalar(0.5, p, y.n_bits()), y.n_bits()), y.n_bits());
  const AdditiveShare d = sub_public(y, half).with_precision(0);
  const auto keys = s.take_cmp(d.size(), model.format().fss_bits, y.n_bits());
  const AdditiveShare le = sign_protocol(s, d.reshaped({d.size()}), keys);
  return public_minus(RingTensor::scalar(1, y.n_bits()), le).reshaped(y.shape());
}

AdditiveShare gather_rows(const AdditiveShare& x, std::span<const std::size_t> rows) {
  if (x.shape().empty()) throw std::invalid_argument("gather_rows needs a leading axis");
  const std::size_t n = x.shape()[0];
  const std::size_t width = n == 0 ? 0 : x.size() / n;
  std::vector<std::uint64_t> out;
  out.reserve(rows.size() * width);
  const auto v = x.values().data();
  for (std::size_t r : rows) {
    if (r >= n) throw std::out_of_range("row " + std::to_string(r) + " of " + std::to_string(n));
    out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(r * width),
               v.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
  }
  Shape shape = x.shape();
  shape[0] = rows.size();
  return {x.party(), RingTensor(std::move(shape), x.n_bits(), std::move(out)), x.precision()};
}

// ---------------------------------------------------------------------------
// Training

std::vector<std::vector<std::vector<std::size_t>>> batch_schedule(std::size_t n, const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<std::vector<std::vector<std::size_t>>> epochs(cfg.epochs);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(cfg.shuffle_seed);
  for (auto& e : epochs) {
    if (cfg.shuffle_seed != 0) {
      // Fisher-Yates with an explicit draw so every platform gets the same order.
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[gen() % i]);
    }
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      e.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + cfg.batch_size)));
    }
  }
  return epochs;
}

namespace {

double reveal_loss(Session& s, const AdditiveShare& y_pred, const AdditiveShare& y_true) {
  auto op = s.op("loss");
  const AdditiveShare d = (y_pred - y_true).reshaped({y_pred.size()});
  const auto t = s.take_triple(TripleSpec::mul({d.size()}, d.n_bits()));
  const AdditiveShare sq = truncate(mul_protocol(s, d, d, t), d.precision());
  std::uint64_t sum = 0;
  for (auto v : sq.values().data()) sum += v;
  const std::uint64_t mine[1] = {sum & ring_mask(d.n_bits())};
  const auto theirs = s.exchange(FrameType::kReveal, mine, d.n_bits());
  return decode_fixed_scalar((mine[0] + theirs[0]) & ring_mask(d.n_bits()), d.precision(), d.n_bits()) /
         static_cast<double>(d.size());
}

}  // namespace

TrainReport train(Session& s, PrivateModel& model, const AdditiveShare& x, const AdditiveShare& y,
                  const TrainConfig& cfg) {
  if (x.shape().empty() || y.shape().size() != 2 || x.shape()[0] != y.shape()[0]) {
    throw std::invalid_argument("train: x is [N, ...] and y is [N, outputs]");
  }
  if (y.shape()[1] != model.arch().outputs()) throw std::invalid_argument("train: target width differs from the model output");
  TrainReport rep;
  for (const auto& epoch : batch_schedule(x.shape()[0], cfg)) {
    double total = 0;
    for (const auto& rows : epoch) {
      const AdditiveShare xb = gather_rows(x, rows);
      const AdditiveShare yb = gather_rows(y, rows);
      ForwardResult f = forward(s, model, xb);
      if (cfg.allow_loss_reveal) {
        rep.batch_loss.push_back(reveal_loss(s, f.y, yb));
        total += rep.batch_loss.back();
      }
      backward(s, model, f.tape, mse_grad(f.y, yb));
      sgd_step(model, cfg.lr, cfg.momentum);
      ++rep.steps;
    }
    if (cfg.allow_loss_reveal) rep.epoch_loss.push_back(total / static_cast<double>(epoch.size()));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Plans

PrepPlan forward_plan(const Architecture& arch, std::size_t batch, const FixedFormat& fmt) {
  const auto shapes = arch.activation_shapes(batch);
  PrepPlan plan;
  auto add = [&](const PrepPlan& p) { plan.insert(plan.end(), p.begin(), p.end()); };
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const std::string tag = arch.layer_tag(i);
    switch (l.kind) {
      case LayerKind::kLinear:
        plan.push_back(PrepRequest::beaver(TripleSpec::matmul(batch, l.in, l.out, fmt.n_bits), tag));
        break;
      case LayerKind::kConv2d:
        plan.push_back(PrepRequest::beaver(TripleSpec::conv(arch.conv_geometry(i, batch), fmt.n_bits), tag));
        break;
      case LayerKind::kReLU:
        add(relu_plan(shape_size(shapes[i]), fmt.n_bits, fmt.fss_bits, tag));
        break;
      case LayerKind::kMaxPool:
        add(l.kernel == 2 ? maxpool_k2_plan(shapes[i], l.stride, fmt.n_bits, fmt.fss_bits, tag)
                          : maxpool_plan(shapes[i], l.kernel, l.stride, fmt.n_bits, fmt.fss_bits, tag));
        break;
      case LayerKind::kFlatten:
        break;
    }
  }
  return plan;
}

PrepPlan backward_plan(const Architecture& arch, std::size_t batch, const FixedFormat& fmt) {
  const auto shapes = arch.activation_shapes(batch);
  PrepPlan plan;
  for (std::size_t ii = arch.layers.size(); ii-- > 0;) {
    const LayerSpec& l = arch.layers[ii];
    const std::string tag = arch.layer_tag(ii) + ".grad";
    switch (l.kind) {
      case LayerKind::kLinear:
        plan.push_back(PrepRequest::beaver(TripleSpec::matmul(l.in, batch, l.out, fmt.n_bits), tag));
        if (ii > 0) plan.push_back(PrepRequest::beaver(TripleSpec::matmul(batch, l.out, l.in, fmt.n_bits), tag));
        break;
      case LayerKind::kConv2d: {
        const ConvGeometry g = arch.conv_geometry(ii, batch);
        plan.push_back(PrepRequest::beaver(TripleSpec::matmul(l.out, g.patch_rows(), g.patch_cols(), fmt.n_bits), tag));
        if (ii > 0) {
          plan.push_back(PrepRequest::beaver(TripleSpec::matmul(g.patch_rows(), l.out, g.patch_cols(), fmt.n_bits), tag));
        }
        break;
      }
      case LayerKind::kReLU:
        if (ii > 0) plan.push_back(PrepRequest::beaver(TripleSpec::mul({shape_size(shapes[ii])}, fmt.n_bits), tag));
        break;
      case LayerKind::kFlatten:
        break;
      case LayerKind::kMaxPool:
        throw std::invalid_argument("max pooling has no private backward pass");
    }
  }
  return plan;
}

PrepPlan predict_plan(const Architecture& arch, std::size_t batch, const FixedFormat& fmt) {
  PrepPlan plan = forward_plan(arch, batch, fmt);
  const std::size_t out = arch.outputs();
  if (out > 1) {
    const PrepPlan a = argmax_plan(batch, out, fmt.n_bits, fmt.fss_bits, "argmax");
    plan.insert(plan.end(), a.begin(), a.end());
  } else {
    plan.push_back(PrepRequest::cmp(batch, fmt.fss_bits, fmt.n_bits, "threshold"));
  }
  return plan;
}

PrepPlan train_plan(const Architecture& arch, std::size_t n, const TrainConfig& cfg, const FixedFormat& fmt) {
  PrepPlan plan;
  for (const auto& epoch : batch_schedule(n, cfg)) {
    for (const auto& rows : epoch) {
      const PrepPlan f = forward_plan(arch, rows.size(), fmt);
      plan.insert(plan.end(), f.begin(), f.end());
      if (cfg.allow_loss_reveal) {
        plan.push_back(PrepRequest::beaver(TripleSpec::mul({rows.size() * arch.outputs()}, fmt.n_bits), "loss"));
      }
      const PrepPlan b = backward_plan(arch, rows.size(), fmt);
      plan.insert(plan.end(), b.begin(), b.end());
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::uint8_t kCheckpointMagic[4] = {'A', 'R', 'N', 'C'};
constexpr std::uint8_t kCheckpointVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint64_t v) {
  if (v > 0xFFFFFFFFULL) throw std::invalid_argument("checkpoint field exceeds 32 bits");
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const PrivateModel& m) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  const FixedFormat& f = m.format();
  out.push_back(kCheckpointVersion);
  out.push_back(static_cast<std::uint8_t>(m.party()));
  out.push_back(static_cast<std::uint8_t>(f.n_bits));
  out.push_back(static_cast<std::uint8_t>(f.precision));
  out.push_back(static_cast<std::uint8_t>(f.fss_bits));
  out.push_back(static_cast<std::uint8_t>(m.arch().input.size()));
  for (auto d : m.arch().input) put_u32(out, d);
  put_u32(out, m.arch().layers.size());
  for (std::size_t i = 0; i < m.arch().layers.size(); ++i) {
    const LayerSpec& l = m.arch().layers[i];
    out.push_back(static_cast<std::uint8_t>(l.kind));
    for (auto v : {l.in, l.out, l.kernel, l.stride, l.padding}) put_u32(out, v);
    for (std::size_t k = 0; k < m.params()[i].size(); ++k) {
      for (const AdditiveShare* t : {&m.params()[i][k], &m.velocity()[i][k]}) {
        const auto packed = pack_ring(t->values().data(), f.n_bits);
        out.insert(out.end(), packed.begin(), packed.end());
      }
    }
  }
  return out;
}

PrivateModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (auto c : kCheckpointMagic) {
    if (r.u8() != c) throw FormatError("not a checkpoint (bad magic)");
  }
  if (r.u8() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  const int party = r.u8();
  FixedFormat f;
  f.n_bits = r.u8();
  f.precision = r.u8();
  f.fss_bits = r.u8();
  if (party > 1 || f.n_bits < 1 || f.n_bits > 64) throw FormatError("bad checkpoint header");
  Architecture arch;
  arch.input.resize(r.u8());
  for (auto& d : arch.input) d = r.u32();
  const std::uint32_t count = r.u32();
  std::vector<std::vector<AdditiveShare>> params(count), velocity(count);
  const std::size_t width = (static_cast<std::size_t>(f.n_bits) + 7) / 8;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec l;
    const std::uint8_t kind = r.u8();
    if (kind < 1 || kind > 5) throw FormatError("unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.in = r.u32();
    l.out = r.u32();
    l.kernel = r.u32();
    l.stride = r.u32();
    l.padding = r.u32();
    arch.layers.push_back(l);
    for (const Shape& shape : l.param_shapes()) {
      for (auto* dst : {&params[i], &velocity[i]}) {
        const auto words = unpack_ring(r.bytes(shape_size(shape) * width), f.n_bits);
        dst->emplace_back(party, RingTensor(shape, f.n_bits, words), f.precision);
      }
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  try {
    arch.activation_shapes(1);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
  PrivateModel m(std::move(arch), f, party, std::move(params));
  m.velocity() = std::move(velocity);
  return m;
}

void save_checkpoint(const PrivateModel& model, const std::string& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

PrivateModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ariann
