#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "ariann/prep.hpp"
#include "ariann/sharing.hpp"

// Private layer protocols built from the sign test, the equality test and
// Beaver products. Every function draws its preprocessing from the session
// in the order listed by the matching *_plan function, and credits its rounds
// to its own tag unless an outer scope is open.
namespace ariann {

class Session;

// Comparisons run on the low fss_bits of the (wider) arithmetic ring.
inline constexpr int kDefaultFssBits = 32;

PrepPlan relu_plan(std::size_t m, int ring_bits, int fss_bits = kDefaultFssBits,
                   const std::string& tag = "relu");
PrepPlan argmax_plan(std::size_t rows, std::size_t m, int ring_bits,
                     int fss_bits = kDefaultFssBits, const std::string& tag = "argmax");
PrepPlan break_ties_plan(std::size_t rows, std::size_t m, int ring_bits,
                         int fss_bits = kDefaultFssBits, const std::string& tag = "break_ties");
PrepPlan maxpool_plan(const Shape& x_shape, std::size_t k, std::size_t stride, int ring_bits,
                      int fss_bits = kDefaultFssBits, const std::string& tag = "maxpool");
PrepPlan maxpool_k2_plan(const Shape& x_shape, std::size_t stride, int ring_bits,
                         int fss_bits = kDefaultFssBits, const std::string& tag = "maxpool_k2");

struct ReluOutput {
  AdditiveShare y;
  AdditiveShare mask;  // 1[x > 0], precision 0; the derivative used by backward
};

// ReLU(0) = 0. Two rounds: the sign test, then the product mask * x.
ReluOutput relu_with_mask(Session& s, const AdditiveShare& x, int fss_bits = kDefaultFssBits);
AdditiveShare relu(Session& s, const AdditiveShare& x, int fss_bits = kDefaultFssBits);

// Over the last axis. Entry j is 1 when x_j is a maximum; ties all get 1.
// Two rounds: m(m-1) pairwise sign tests, then m equality tests.
AdditiveShare argmax(Session& s, const AdditiveShare& x, int fss_bits = kDefaultFssBits);

// Keeps exactly one of the 1s of each row of a 0/1 tensor, chosen uniformly
// with public coins. One round.
AdditiveShare break_ties(Session& s, const AdditiveShare& delta, int fss_bits = kDefaultFssBits);

// [B,C,H,W] -> [B,C,Ho,Wo]. Windows are unrolled, a one-hot argmax is found
// per window (ties broken towards the later index) and dotted with the
// window. Three rounds.
AdditiveShare maxpool(Session& s, const AdditiveShare& x, std::size_t k, std::size_t stride = 2,
                      int fss_bits = kDefaultFssBits);
// k = 2 by a tree of pairwise max(a, b) = b + ReLU(a - b). Four rounds,
// three comparisons per window.
AdditiveShare maxpool_k2(Session& s, const AdditiveShare& x, std::size_t stride = 2,
                         int fss_bits = kDefaultFssBits);

// x * y with both operands at precision p, truncated back to p. One round.
AdditiveShare mul_fixed(Session& s, const AdditiveShare& x, const AdditiveShare& y);

// theta <- theta * ((C + 1) - v * theta^2) / C, `iters` times. Three rounds
// per iteration.
AdditiveShare inv_sqrt_newton(Session& s, const AdditiveShare& v, const AdditiveShare& theta0,
                              int iters, int C);
AdditiveShare inv_sqrt_newton(Session& s, const AdditiveShare& v, double theta0, int iters, int C);
PrepPlan inv_sqrt_plan(std::size_t m, int ring_bits, int iters, const std::string& tag = "inv_sqrt");

struct BatchNormPolicy {
  int cold_iters = 50;  // no previous estimate
  int warm_iters = 3;   // starting from the previous batch's result
  int C = 6;
  double theta0 = 0.2;
  double eps = 1e-3;
  bool warm_start = true;
};

struct BatchNormState {
  std::optional<AdditiveShare> theta;  // last inverse standard deviation, [F]
};

// x: [B, F]; gamma, beta: [F], same precision as x. Returns
// gamma * theta * (x - mean) + beta with theta ~ 1/sqrt(var + eps).
AdditiveShare batchnorm_forward(Session& s, const AdditiveShare& x, const AdditiveShare& gamma,
                                const AdditiveShare& beta, BatchNormState& state,
                                const BatchNormPolicy& policy = {});
PrepPlan batchnorm_plan(std::size_t batch, std::size_t features, int ring_bits, int iters,
                        const std::string& tag = "batchnorm");

// Shared helpers over the last axis, local only.
AdditiveShare sum_last_axis(const AdditiveShare& x);
AdditiveShare concat_flat(const AdditiveShare& a, const AdditiveShare& b);

}  // namespace ariann
