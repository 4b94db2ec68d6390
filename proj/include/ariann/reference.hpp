#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ariann/model.hpp"

// Plaintext counterparts of the private networks: one in doubles, one in
// the same fixed-point ring arithmetic the parties use (with exact floor
// truncation and no comparison failures).
namespace ariann {

struct FloatArith {
  using T = double;
  T from_real(double v) const { return v; }
  double to_real(T v) const { return v; }
  T add(T a, T b) const { return a + b; }
  T sub(T a, T b) const { return a - b; }
  T mul(T a, T b) const { return a * b; }
  T rescale(T v) const { return v; }
  T times(T v, double c) const { return v * c; }
  bool positive(T v) const { return v > 0; }
  T zero() const { return 0.0; }
};

struct FixedArith {
  using T = std::uint64_t;
  // Private truncation lands on floor(v / d) or the next value up, with
  // mean v / d; rounding to nearest follows it more closely than floor.
  enum class Rounding { kNearest, kFloor };
  int n_bits = 64;
  int precision = 3;
  Rounding rounding = Rounding::kNearest;
  T from_real(double v) const;
  double to_real(T v) const;
  T add(T a, T b) const { return (a + b) & ring_mask(n_bits); }
  T sub(T a, T b) const { return (a - b) & ring_mask(n_bits); }
  T mul(T a, T b) const { return (a * b) & ring_mask(n_bits); }
  T rescale(T v) const;  // v / 10^precision, signed
  T times(T v, double c) const;  // as mul_public_scalar
  bool positive(T v) const { return to_signed(v, n_bits) > 0; }
  T zero() const { return 0; }
};

template <class A>
class RefNet {
 public:
  using T = typename A::T;

  RefNet(Architecture arch, const Params& params, A arith = {});

  const Architecture& arch() const { return arch_; }
  const A& arith() const { return arith_; }

  std::vector<T> encode(std::span<const double> v) const;
  std::vector<double> decode(std::span<const T> v) const;

  // x: batch rows of the input; keeps what backward needs.
  std::vector<T> forward(std::span<const T> x, std::size_t batch);
  void backward(std::span<const T> grad_out);
  void sgd_step(double lr, double momentum);
  std::vector<T> mse_grad(std::span<const T> pred, std::span<const T> target) const;

  Params params() const;
  Params grads() const;
  void set_params(const Params& p);

 private:
  Architecture arch_;
  A arith_;
  std::size_t batch_ = 0;
  std::vector<std::vector<std::vector<T>>> params_, grads_, velocity_;
  std::vector<std::vector<T>> inputs_;
  std::vector<std::vector<bool>> masks_;
};

using FloatNet = RefNet<FloatArith>;
using FixedNet = RefNet<FixedArith>;

// Mirrors train(): same batch schedule, loss and update.
template <class A>
std::vector<double> train_reference(RefNet<A>& net, std::span<const double> x, std::span<const double> y,
                                    std::size_t n, const TrainConfig& cfg);

// First maximum of each output row; with one output, 1[y > 1/2].
template <class A>
std::vector<int> predict_labels(RefNet<A>& net, std::span<const double> x, std::size_t n,
                                std::size_t chunk = 256);

double mse_loss(std::span<const double> pred, std::span<const double> target);

// Labels from a one-hot (or single-column 0/1) opened prediction. A row
// that is not exactly one-hot gives -1.
std::vector<int> labels_from_onehot(std::span<const double> onehot, std::size_t rows);

}  // namespace ariann
