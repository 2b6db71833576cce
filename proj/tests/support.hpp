#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "geoset/contrast.hpp"
#include "geoset/types.hpp"

namespace geoset::testing {

inline FeatureMap random_unit_map(int height, int width, int channels, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  FeatureMap f(height, width, channels);
  for (auto& x : f.data()) x = gauss(rng);
  return normalize(f);
}

inline Eigen::VectorXd unit(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v.normalized();
}

// Distinct random pixels of an h x w grid.
inline std::vector<Pixel> random_pixels(int height, int width, std::size_t count, std::mt19937_64& rng) {
  std::vector<Pixel> all;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) all.push_back({u, v});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return all;
}

// Reference InfoNCE: mean over t of
// -log(exp(a_t.p_t / tau) / (exp(a_t.p_t / tau) + sum_{k != t} exp(a_t.q_k / tau))).
inline double reference_infonce(const std::vector<Eigen::VectorXd>& anchors,
                                const std::vector<Eigen::VectorXd>& positives,
                                const std::vector<Eigen::VectorXd>& negatives, double tau) {
  double total = 0.0;
  for (std::size_t t = 0; t < anchors.size(); ++t) {
    const double pos = std::exp(anchors[t].dot(positives[t]) / tau);
    double denom = pos;
    for (std::size_t k = 0; k < negatives.size(); ++k)
      if (k != t) denom += std::exp(anchors[t].dot(negatives[k]) / tau);
    total += -std::log(pos / denom);
  }
  return total / static_cast<double>(anchors.size());
}

// Central differences of `loss` with respect to every entry of `values`.
inline std::vector<double> central_differences(std::span<double> values, const std::function<double()>& loss,
                                               double h = 1e-4) {
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss();
    values[i] = saved - h;
    const double down = loss();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ||a - b|| / max(||a||, ||b||), or the absolute difference when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale > 1e-12 ? std::sqrt(diff) / scale : std::sqrt(diff);
}

}  // namespace geoset::testing
