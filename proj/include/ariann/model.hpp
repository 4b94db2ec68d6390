#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ariann/nn_ops.hpp"
#include "ariann/prep.hpp"
#include "ariann/sharing.hpp"

// Private sequential networks: forward, backward and SGD on shares.
namespace ariann {

class Session;

enum class LayerKind : std::uint8_t { kLinear = 1, kConv2d = 2, kReLU = 3, kFlatten = 4, kMaxPool = 5 };

struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  std::size_t in = 0;  // features (linear) or channels (conv)
  std::size_t out = 0;
  std::size_t kernel = 0;  // conv and max pooling
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec relu();
  static LayerSpec flatten();
  static LayerSpec maxpool(std::size_t kernel, std::size_t stride);

  std::string name() const;
  // {weights, bias} for linear and conv layers, nothing otherwise.
  std::vector<Shape> param_shapes() const;
  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  Shape input;  // one sample, without the batch axis
  std::vector<LayerSpec> layers;

  // Activation shapes for a batch: entry i is layer i's input, the last
  // entry the network output. Throws on inconsistent layers.
  std::vector<Shape> activation_shapes(std::size_t batch) const;
  std::size_t outputs() const;
  std::string layer_tag(std::size_t i) const;  // "linear0", "relu1", ...
  ConvGeometry conv_geometry(std::size_t i, std::size_t batch) const;
  std::string describe() const;
  bool operator==(const Architecture&) const = default;

  // Linear layers of the given widths with a ReLU between consecutive ones.
  static Architecture mlp(const std::vector<std::size_t>& widths);
  // 784-128-128-10, the fully connected MNIST network.
  static Architecture network1();
  // Conv(1->16, k5) MaxPool2 ReLU Conv(16->16, k5) MaxPool2 ReLU FC 256-100 ReLU FC 100-10.
  static Architecture network2();
};

// Real-valued parameters, [layer][param] -> row-major values. Linear
// weights are [in, out] so that y = x W + b; conv kernels are [O, C, k, k].
using Params = std::vector<std::vector<std::vector<double>>>;

// Uniform in +-1/sqrt(fan_in), biases zero.
Params init_params(const Architecture& arch, std::uint64_t seed);

struct FixedFormat {
  int n_bits = 64;
  int precision = 3;
  int fss_bits = kDefaultFssBits;  // input domain of the comparison keys
  bool operator==(const FixedFormat&) const = default;
};

class PrivateModel {
 public:
  PrivateModel() = default;
  PrivateModel(Architecture arch, FixedFormat fmt, int party,
               std::vector<std::vector<AdditiveShare>> params);

  const Architecture& arch() const { return arch_; }
  const FixedFormat& format() const { return fmt_; }
  int party() const { return party_; }

  // [layer][param]; empty vectors for layers without parameters.
  std::vector<std::vector<AdditiveShare>>& params() { return params_; }
  const std::vector<std::vector<AdditiveShare>>& params() const { return params_; }
  std::vector<std::vector<AdditiveShare>>& grads() { return grads_; }
  const std::vector<std::vector<AdditiveShare>>& grads() const { return grads_; }
  std::vector<std::vector<AdditiveShare>>& velocity() { return velocity_; }
  const std::vector<std::vector<AdditiveShare>>& velocity() const { return velocity_; }

 private:
  Architecture arch_;
  FixedFormat fmt_;
  int party_ = 0;
  std::vector<std::vector<AdditiveShare>> params_;
  std::vector<std::vector<AdditiveShare>> grads_;
  std::vector<std::vector<AdditiveShare>> velocity_;
};

struct ModelPair {
  PrivateModel m0;
  PrivateModel m1;
};

ModelPair share_model(const Architecture& arch, const Params& params, const FixedFormat& fmt,
                      Rng& rng);
// Test and export helper: opens both halves.
Params reconstruct_model(const PrivateModel& m0, const PrivateModel& m1);

// What backward needs from forward.
struct Tape {
  std::size_t batch = 0;
  std::vector<AdditiveShare> inputs;  // input of every layer
  std::vector<AdditiveShare> masks;   // ReLU derivative, empty for other layers
  bool consumed = false;              // set by backward; a tape serves one pass
};

struct ForwardResult {
  AdditiveShare y;
  Tape tape;
};

// x: [B, input...] at the model's precision.
ForwardResult forward(Session& s, const PrivateModel& model, const AdditiveShare& x);
// Fills model.grads() from dL/dy. One round per layer (the ReLU backward
// and each linear layer's dW / dx products share a round). Throws
// std::logic_error on a tape that was already used.
void backward(Session& s, PrivateModel& model, Tape& tape, const AdditiveShare& grad_out);
// v <- momentum * v + g; theta <- theta - lr * v. Local.
void sgd_step(PrivateModel& model, double lr, double momentum);

// d/dy of mean((y - t)^2) over all B*D entries: 2 (y - t) / (B D). Local.
AdditiveShare mse_grad(const AdditiveShare& y_pred, const AdditiveShare& y_true);

// One-hot argmax of the outputs; with a single output, 1[y > 1/2].
AdditiveShare predict(Session& s, const PrivateModel& model, const AdditiveShare& x);

// Rows of a [N, ...] share.
AdditiveShare gather_rows(const AdditiveShare& x, std::span<const std::size_t> rows);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  double lr = 0.1;
  double momentum = 0.0;
  std::uint64_t shuffle_seed = 0;  // 0 keeps the data order
  // Opens the per-batch loss (one extra product and one reveal per batch).
  bool allow_loss_reveal = false;
};

struct TrainReport {
  std::size_t steps = 0;
  std::vector<double> epoch_loss;  // empty unless the loss may be revealed
  std::vector<double> batch_loss;
};

// Public batch order: per epoch, a list of row index lists.
std::vector<std::vector<std::vector<std::size_t>>> batch_schedule(std::size_t n,
                                                                  const TrainConfig& cfg);

// x: [N, input...], y: [N, outputs]. Never opens model state.
TrainReport train(Session& s, PrivateModel& model, const AdditiveShare& x, const AdditiveShare& y,
                  const TrainConfig& cfg);

// Offline material, in consumption order, tagged per layer.
PrepPlan forward_plan(const Architecture& arch, std::size_t batch, const FixedFormat& fmt);
PrepPlan backward_plan(const Architecture& arch, std::size_t batch, const FixedFormat& fmt);
PrepPlan predict_plan(const Architecture& arch, std::size_t batch, const FixedFormat& fmt);
PrepPlan train_plan(const Architecture& arch, std::size_t n, const TrainConfig& cfg,
                    const FixedFormat& fmt);

// One file per party: header, then each layer's parameter and momentum
// shares.
void save_checkpoint(const PrivateModel& model, const std::string& path);
PrivateModel load_checkpoint(const std::string& path);
std::vector<std::uint8_t> encode_checkpoint(const PrivateModel& model);
PrivateModel decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace ariann
