#include "ariann/datasets.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ariann {

std::vector<double> Dataset::targets(std::size_t outputs) const {
  std::vector<double> t(n * outputs, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (outputs == 1) {
      t[i] = labels[i];
    } else {
      if (static_cast<std::size_t>(labels[i]) >= outputs) throw std::invalid_argument("label exceeds output width");
      t[i * outputs + static_cast<std::size_t>(labels[i])] = 1.0;
    }
  }
  return t;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n) throw std::out_of_range("dataset slice out of range");
  Dataset d;
  d.n = end - begin;
  d.features = features;
  d.classes = classes;
  d.x.assign(x.begin() + static_cast<std::ptrdiff_t>(begin * features),
             x.begin() + static_cast<std::ptrdiff_t>(end * features));
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  labels.begin() + static_cast<std::ptrdiff_t>(end));
  return d;
}

Dataset make_blobs(std::size_t n, std::size_t features, std::size_t classes, double spread, std::uint64_t seed) {
  if (classes == 0 || features == 0) throw std::invalid_argument("blobs need features and classes");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<double> centres(classes * features);
  for (auto& c : centres) c = u(gen);
  Dataset d{n, features, classes, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(gen() % classes);
    d.labels.push_back(static_cast<int>(c));
    for (std::size_t f = 0; f < features; ++f) d.x.push_back(centres[c * features + f] + noise(gen));
  }
  return d;
}

Dataset make_moons(std::size_t n, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
  std::normal_distribution<double> eps(0.0, noise);
  Dataset d{n, 2, 2, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(gen() & 1U);
    const double t = u(gen);
    double a = std::cos(t), b = std::sin(t);
    if (c == 1) {
      a = 1.0 - a;
      b = 0.5 - b;
    }
    d.labels.push_back(c);
    d.x.push_back((a - 0.5) / 1.5 + eps(gen));
    d.x.push_back((b - 0.25) / 1.5 + eps(gen));
  }
  return d;
}

Dataset make_xor(std::size_t n, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> eps(0.0, noise);
  Dataset d{n, 2, 2, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(i & 1U), b = static_cast<int>((i >> 1) & 1U);
    d.labels.push_back(a ^ b);
    d.x.push_back(a + (noise > 0 ? eps(gen) : 0.0));
    d.x.push_back(b + (noise > 0 ? eps(gen) : 0.0));
  }
  return d;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size() || labels.empty()) throw std::invalid_argument("accuracy: size mismatch");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += predicted[i] == labels[i];
  return static_cast<double>(ok) / static_cast<double>(labels.size());
}

double agreement(const std::vector<int>& a, const std::vector<int>& b) { return accuracy(a, b); }

}  // namespace ariann
