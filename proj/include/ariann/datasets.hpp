#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Small synthetic classification tasks.
namespace ariann {

struct Dataset {
  std::size_t n = 0;
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<double> x;  // [n, features]
  std::vector<int> labels;

  // [n, outputs]: the 0/1 label for one output, one-hot otherwise.
  std::vector<double> targets(std::size_t outputs) const;
  Dataset slice(std::size_t begin, std::size_t end) const;
};

// Isotropic Gaussian clusters around random centres in [-1, 1]^features.
Dataset make_blobs(std::size_t n, std::size_t features, std::size_t classes, double spread,
                   std::uint64_t seed);
// Two interleaved half circles, scaled into roughly [-1, 1]^2.
Dataset make_moons(std::size_t n, double noise, std::uint64_t seed);
// Points around the four corners of the unit square, labelled a XOR b.
// n = 4 with zero noise is the truth table itself.
Dataset make_xor(std::size_t n, double noise, std::uint64_t seed);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);
double agreement(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace ariann
