#include "ariann/beaver.hpp"

#include <sstream>

#include "ariann/session.hpp"

namespace ariann {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint64_t v) {
  if (v > 0xFFFFFFFFULL) throw std::invalid_argument("dimension too large to encode");
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[at_++];
  }
  std::uint64_t u32() {
    need(4);
    std::uint64_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint64_t{b_[at_ + i]} << (8 * i);
    at_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(at_, n);
    at_ += n;
    return s;
  }
  bool done() const { return at_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - at_ < n) throw FormatError("truncated triple payload");
  }
  std::span<const std::uint8_t> b_;
  std::size_t at_ = 0;
};

void put_shape(std::vector<std::uint8_t>& out, const Shape& s) {
  out.push_back(static_cast<std::uint8_t>(s.size()));
  for (auto d : s) put_u32(out, d);
}

Shape get_shape(Reader& r) {
  Shape s(r.u8());
  for (auto& d : s) d = r.u32();
  return s;
}

void put_tensor(std::vector<std::uint8_t>& out, const RingTensor& t) {
  const auto bytes = pack_ring(t.data(), t.n_bits());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

RingTensor get_tensor(Reader& r, const Shape& shape, int n_bits) {
  const std::size_t w = static_cast<std::size_t>((n_bits + 7) / 8);
  return RingTensor(shape, n_bits, unpack_ring(r.take(shape_size(shape) * w), n_bits));
}

}  // namespace

TripleSpec TripleSpec::mul(Shape shape, int n_bits) {
  TripleSpec s;
  s.op = TripleOp::kMul;
  s.n_bits = n_bits;
  s.x_shape = shape;
  s.y_shape = std::move(shape);
  return s;
}

TripleSpec TripleSpec::matmul(std::size_t m, std::size_t k, std::size_t n, int n_bits) {
  TripleSpec s;
  s.op = TripleOp::kMatmul;
  s.n_bits = n_bits;
  s.x_shape = {m, k};
  s.y_shape = {k, n};
  return s;
}

TripleSpec TripleSpec::conv(const ConvGeometry& g, int n_bits) {
  g.validate();
  TripleSpec s;
  s.op = TripleOp::kConv;
  s.n_bits = n_bits;
  s.x_shape = g.input_shape();
  s.y_shape = g.kernel_shape();
  s.geometry = g;
  return s;
}

Shape TripleSpec::z_shape() const {
  switch (op) {
    case TripleOp::kMul:
      return x_shape;
    case TripleOp::kMatmul:
      return {x_shape.at(0), y_shape.at(1)};
    case TripleOp::kConv:
      return geometry.output_shape();
  }
  return {};
}

void TripleSpec::validate() const {
  check_ring_bits(n_bits);
  switch (op) {
    case TripleOp::kMul:
      if (x_shape != y_shape) throw std::invalid_argument("elementwise triple needs equal shapes");
      break;
    case TripleOp::kMatmul:
      if (x_shape.size() != 2 || y_shape.size() != 2 || x_shape[1] != y_shape[0]) {
        throw std::invalid_argument("unsupported matmul geometry " + shape_string(x_shape) +
                                    " x " + shape_string(y_shape));
      }
      break;
    case TripleOp::kConv:
      geometry.validate();
      if (x_shape != geometry.input_shape() || y_shape != geometry.kernel_shape()) {
        throw std::invalid_argument("conv triple shapes disagree with geometry");
      }
      break;
    default:
      throw std::invalid_argument("unknown triple op");
  }
}

std::string TripleSpec::describe() const {
  std::ostringstream os;
  const char* names[] = {"mul", "matmul", "conv"};
  os << names[static_cast<int>(op)] << shape_string(x_shape) << "x" << shape_string(y_shape)
     << "@Z2^" << n_bits;
  if (op == TripleOp::kConv) os << " stride " << geometry.stride << " pad " << geometry.padding;
  return os.str();
}

RingTensor apply_bilinear(const TripleSpec& spec, const RingTensor& x, const RingTensor& y) {
  switch (spec.op) {
    case TripleOp::kMul:
      return x * y;
    case TripleOp::kMatmul:
      return matmul(x, y);
    case TripleOp::kConv:
      return conv2d(x, y, spec.geometry);
  }
  throw std::invalid_argument("unknown triple op");
}

TriplePair gen_triple(const TripleSpec& spec, Rng& rng) {
  spec.validate();
  auto rand_tensor = [&](const Shape& shape) {
    std::vector<std::uint64_t> v(shape_size(shape));
    for (auto& e : v) e = rng.next_bits(spec.n_bits);
    return RingTensor(shape, spec.n_bits, std::move(v));
  };
  const RingTensor a = rand_tensor(spec.x_shape);
  const RingTensor b = rand_tensor(spec.y_shape);
  const RingTensor c = apply_bilinear(spec, a, b);
  TriplePair p;
  const std::uint64_t id = next_batch_id();
  p.t0 = {spec, id, rand_tensor(spec.x_shape), rand_tensor(spec.y_shape), rand_tensor(spec.z_shape())};
  p.t1 = {spec, id, a - p.t0.a, b - p.t0.b, c - p.t0.c};
  return p;
}

// op u8 | n u8 | x shape | y shape | geometry (8 x u32) | a | b | c
std::vector<std::uint8_t> encode_triple(const TripleShare& t) {
  t.spec.validate();
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(t.spec.op));
  out.push_back(static_cast<std::uint8_t>(t.spec.n_bits));
  put_shape(out, t.spec.x_shape);
  put_shape(out, t.spec.y_shape);
  const ConvGeometry& g = t.spec.geometry;
  for (auto v : {g.batch, g.in_channels, g.height, g.width, g.out_channels, g.kernel, g.stride,
                 g.padding}) {
    put_u32(out, v);
  }
  put_tensor(out, t.a);
  put_tensor(out, t.b);
  put_tensor(out, t.c);
  return out;
}

TripleShare decode_triple(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  TripleShare t;
  const std::uint8_t op = r.u8();
  if (op > 2) throw FormatError("unknown triple op " + std::to_string(op));
  t.spec.op = static_cast<TripleOp>(op);
  t.spec.n_bits = r.u8();
  t.spec.x_shape = get_shape(r);
  t.spec.y_shape = get_shape(r);
  ConvGeometry& g = t.spec.geometry;
  for (std::size_t* f : {&g.batch, &g.in_channels, &g.height, &g.width, &g.out_channels,
                         &g.kernel, &g.stride, &g.padding}) {
    *f = r.u32();
  }
  try {
    t.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad triple spec: ") + e.what());
  }
  t.a = get_tensor(r, t.spec.x_shape, t.spec.n_bits);
  t.b = get_tensor(r, t.spec.y_shape, t.spec.n_bits);
  t.c = get_tensor(r, t.spec.z_shape(), t.spec.n_bits);
  if (!r.done()) throw FormatError("trailing bytes in triple payload");
  t.id = next_batch_id();
  return t;
}

KeyBatch pack_triple(const TripleShare* t0, const TripleShare* t1) {
  const TripleShare* any = t0 != nullptr ? t0 : t1;
  if (any == nullptr) throw std::invalid_argument("pack_triple needs at least one half");
  KeyBatch b;
  b.kind = PrepKind::kTriple;
  b.n_bits = any->spec.n_bits;
  b.out_bits = any->spec.n_bits;
  b.lambda = 0;
  b.count = 1;
  if (t0) b.payload[0] = encode_triple(*t0);
  if (t1) b.payload[1] = encode_triple(*t1);
  return b;
}

TripleShare unpack_triple(const KeyBatch& b, int party) {
  if (b.kind != PrepKind::kTriple) throw FormatError("key batch is not a triple");
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
  if (!b.payload[party]) throw FormatError("no triple half for party " + std::to_string(party));
  return decode_triple(*b.payload[party]);
}

std::vector<AdditiveShare> beaver_batch(Session& s, std::span<const BeaverJob> jobs) {
  if (jobs.empty()) return {};
  const int n = jobs.front().x->n_bits();
  std::vector<std::uint64_t> masked;
  for (const BeaverJob& j : jobs) {
    const TripleSpec& spec = j.triple->spec;
    if (j.x->shape() != spec.x_shape || j.y->shape() != spec.y_shape ||
        j.x->n_bits() != spec.n_bits || j.y->n_bits() != spec.n_bits || spec.n_bits != n) {
      throw std::invalid_argument("operands " + shape_string(j.x->shape()) + ", " +
                                  shape_string(j.y->shape()) + " do not match triple " +
                                  spec.describe());
    }
    if (j.x->party() != s.party() || j.y->party() != s.party()) {
      throw std::invalid_argument("share belongs to the other party");
    }
  }
  for (const BeaverJob& j : jobs) s.consume(j.triple->id, "triple");
  for (const BeaverJob& j : jobs) {
    const RingTensor d = j.x->values() - j.triple->a;
    const RingTensor e = j.y->values() - j.triple->b;
    masked.insert(masked.end(), d.data().begin(), d.data().end());
    masked.insert(masked.end(), e.data().begin(), e.data().end());
  }
  const auto theirs = s.exchange(FrameType::kTripleDelta, masked, n);
  std::vector<AdditiveShare> out;
  out.reserve(jobs.size());
  std::size_t at = 0;
  for (const BeaverJob& j : jobs) {
    const TripleSpec& spec = j.triple->spec;
    auto open = [&](const Shape& shape) {
      const std::size_t len = shape_size(shape);
      std::vector<std::uint64_t> v(len);
      for (std::size_t i = 0; i < len; ++i) v[i] = masked[at + i] + theirs[at + i];
      at += len;
      return RingTensor::wrap(shape, n, std::move(v));
    };
    const RingTensor delta = open(spec.x_shape);
    const RingTensor eps = open(spec.y_shape);
    RingTensor z = apply_bilinear(spec, delta, j.triple->b) +
                   apply_bilinear(spec, j.triple->a, eps) + j.triple->c;
    if (s.party() == 0) z = z + apply_bilinear(spec, delta, eps);
    out.emplace_back(s.party(), std::move(z), j.x->precision() + j.y->precision());
  }
  return out;
}

AdditiveShare mul_protocol(Session& s, const AdditiveShare& x, const AdditiveShare& y,
                           const TripleShare& t) {
  if (t.spec.op != TripleOp::kMul) throw std::invalid_argument("mul needs an elementwise triple");
  const BeaverJob job{&x, &y, &t};
  return std::move(beaver_batch(s, {&job, 1}).front());
}

AdditiveShare matmul_protocol(Session& s, const AdditiveShare& x, const AdditiveShare& y,
                              const TripleShare& t) {
  if (t.spec.op != TripleOp::kMatmul) throw std::invalid_argument("matmul needs a matmul triple");
  const BeaverJob job{&x, &y, &t};
  return std::move(beaver_batch(s, {&job, 1}).front());
}

AdditiveShare conv2d_protocol(Session& s, const AdditiveShare& x, const AdditiveShare& kernel,
                              const TripleShare& t, const ConvGeometry& g) {
  if (t.spec.op != TripleOp::kConv || !(t.spec.geometry == g)) {
    throw std::invalid_argument("conv triple is bound to a different geometry");
  }
  const BeaverJob job{&x, &kernel, &t};
  return std::move(beaver_batch(s, {&job, 1}).front());
}

}  // namespace ariann
