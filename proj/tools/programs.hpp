#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ariann/datasets.hpp"
#include "ariann/model.hpp"
#include "ariann/run.hpp"

// The programs behind the command line: micro-benchmarks of single
// protocols and the small end-to-end experiments. Each returns JSON records,
// one per measurement.
namespace ariann::programs {

using json = nlohmann::json;
using Records = std::vector<json>;

struct Settings {
  FixedFormat fmt;
  std::uint64_t seed = 1;  // dealer and share randomness
  TransportKind transport = TransportKind::kLocal;
  // Preprocess the whole plan into bundles first instead of streaming.
  bool bundles = false;
};

std::string transport_name(TransportKind t);

// --- single protocols ------------------------------------------------------

// compare relu argmax maxpool maxpool-k2 matmul conv
const std::vector<std::string>& op_names();
int expected_rounds(const std::string& op);

// Inputs of one benchmark run, derived from the seed. Party j's shares are
// what it would receive from the data owner.
struct OpInstance {
  std::string op;
  std::size_t batch = 0;
  FixedFormat fmt;
  RingTensor x, w;  // w: second operand of matmul and conv
  ConvGeometry geometry;
  AdditiveShare x_share[2], w_share[2];
};

OpInstance make_op(const std::string& op, std::size_t batch, const FixedFormat& fmt, std::uint64_t seed);
PrepPlan op_plan(const OpInstance& inst);
// Runs the protocol on this party's shares.
AdditiveShare run_op(Session& s, const OpInstance& inst);
// Plaintext result in the output ring.
RingTensor op_oracle(const OpInstance& inst);
// Opens the output and compares it with the oracle: {elements, mismatches}.
std::pair<std::size_t, std::size_t> check_op(const OpInstance& inst, const RingTensor& opened);

json bench_op(const std::string& op, std::size_t batch, const Settings& st);

// Every (alpha, x) pair of an n-bit domain through keygen and both
// evaluations, comparison and equality.
json compare_exhaustive(int n_bits);

// --- learning tasks ----------------------------------------------------------

struct Task {
  std::string name;
  Dataset train, test;
  Architecture arch;
  std::size_t outputs = 1;
  TrainConfig cfg;
  std::uint64_t init_seed = 3;
};

// "xor" (noisy XOR, 2-8-1), "moons" (2-16-16-2), "toy-mlp" (16-64-64-10
// on ten gaussian blobs).
Task make_task(const std::string& name);

// Labels of a private model on a dataset, opened at the end.
std::vector<int> private_labels(const PrivateModel& m0, const PrivateModel& m1, const Dataset& d,
                                std::size_t outputs, const Settings& st, RoundLedger* ledger = nullptr);

// Plaintext training, then plaintext, fixed-point and private evaluation.
json infer_demo(const std::string& task, std::size_t samples, const Settings& st);

// Private training against the same run in fixed-point and in floating
// point; `epochs` overrides the task default when set.
json train_demo(const std::string& task, std::optional<std::size_t> epochs, const Settings& st);

// Private inference of a plaintext-trained model with the comparison domain
// varied; one record per (fss_bits, precision).
Records precision_sweep(const std::string& model, const std::vector<int>& fss_bits,
                        const std::vector<int>& precisions, const Settings& st);

// Masks of every topology with n <= max_n summed over all clients, and an
// aggregate of random models checked against the plaintext sum.
json fl_mask_sweep(std::size_t max_n);

// XOR split over `clients`, `rounds` federated rounds; one record per round
// and a summary against centralized fixed-point training.
Records fl_demo(std::size_t clients, std::size_t k, std::size_t rounds, const Settings& st);

}  // namespace ariann::programs
