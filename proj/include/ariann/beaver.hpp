#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ariann/key_io.hpp"
#include "ariann/linalg.hpp"
#include "ariann/sharing.hpp"

namespace ariann {

class Session;

enum class TripleOp : std::uint8_t { kMul = 0, kMatmul = 1, kConv = 2 };

// The bilinear map a triple is bound to, with its operand shapes.
struct TripleSpec {
  TripleOp op = TripleOp::kMul;
  int n_bits = 64;
  Shape x_shape;
  Shape y_shape;
  ConvGeometry geometry;  // kConv only

  static TripleSpec mul(Shape shape, int n_bits);
  static TripleSpec matmul(std::size_t m, std::size_t k, std::size_t n, int n_bits);
  static TripleSpec conv(const ConvGeometry& g, int n_bits);

  Shape z_shape() const;
  void validate() const;
  std::string describe() const;
  bool operator==(const TripleSpec&) const = default;
};

// x (op) y for the spec's bilinear op.
RingTensor apply_bilinear(const TripleSpec& spec, const RingTensor& x, const RingTensor& y);

// One party's half of a triple: c = a (op) b once both halves are summed.
struct TripleShare {
  TripleSpec spec;
  std::uint64_t id = 0;
  RingTensor a, b, c;
  bool operator==(const TripleShare& o) const {
    return spec == o.spec && a == o.a && b == o.b && c == o.c;
  }
};

struct TriplePair {
  TripleShare t0;
  TripleShare t1;
};

TriplePair gen_triple(const TripleSpec& spec, Rng& rng);

std::vector<std::uint8_t> encode_triple(const TripleShare& t);
TripleShare decode_triple(std::span<const std::uint8_t> bytes);
// Kind-2 key-file container (one triple, one or both halves).
KeyBatch pack_triple(const TripleShare* t0, const TripleShare* t1);
TripleShare unpack_triple(const KeyBatch& batch, int party);

struct BeaverJob {
  const AdditiveShare* x = nullptr;
  const AdditiveShare* y = nullptr;
  const TripleShare* triple = nullptr;
};

// Runs all jobs in a single round (their masked operands travel in one
// frame). Result precision is x.precision + y.precision; no truncation.
std::vector<AdditiveShare> beaver_batch(Session& s, std::span<const BeaverJob> jobs);

AdditiveShare mul_protocol(Session& s, const AdditiveShare& x, const AdditiveShare& y,
                           const TripleShare& t);
AdditiveShare matmul_protocol(Session& s, const AdditiveShare& x, const AdditiveShare& y,
                              const TripleShare& t);
AdditiveShare conv2d_protocol(Session& s, const AdditiveShare& x, const AdditiveShare& kernel,
                              const TripleShare& t, const ConvGeometry& g);

}  // namespace ariann
