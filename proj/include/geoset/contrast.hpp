#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "geoset/types.hpp"

namespace geoset {

/// H x W grid of C-dimensional feature vectors, stored row-major with the
/// channel index fastest.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  bool normalized() const noexcept { return normalized_; }
  void set_normalized(bool value) noexcept { normalized_ = value; }

  bool contains(Pixel p) const noexcept {
    return p.u >= 0 && p.v >= 0 && p.u < width_ && p.v < height_;
  }
  std::span<double> at(Pixel p);
  std::span<const double> at(Pixel p) const;

  Eigen::Map<Eigen::VectorXd> vec(Pixel p);
  Eigen::Map<const Eigen::VectorXd> vec(Pixel p) const;

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }

  bool same_shape(const FeatureMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t offset(Pixel p) const;

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  bool normalized_ = false;
  std::vector<double> values_;
};

/// Softmax temperature; rejects non-positive values.
class Temperature {
 public:
  static constexpr double kDefault = 0.07;

  Temperature() = default;
  explicit Temperature(double tau);

  double value() const noexcept { return tau_; }

 private:
  double tau_ = kDefault;
};

/// Set aggregation: the mean of member features, or the feature of one
/// member picked deterministically from (seed, set id, view id).
struct Aggregator {
  enum class Kind { Mean, ArbitraryPoint };

  Kind kind = Kind::Mean;
  std::uint64_t seed = 0;

  static Aggregator mean() { return {}; }
  static Aggregator arbitrary_point(std::uint64_t seed) { return {Kind::ArbitraryPoint, seed}; }

  bool operator==(const Aggregator&) const = default;
};

/// Identifies the (set, view) an aggregate is taken over.
struct AggregateKey {
  std::uint32_t set = 0;
  int view = 0;
};

/// Unit-norm point features, one row per 3D point.
using PointFeatures = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LossOutput {
  double loss = 0.0;
  /// Gradient with respect to each input feature map. Keyed by view id for
  /// set_infonce and the batch pixel loss; by kAnchorSide / kPositiveSide
  /// for the two-map losses.
  std::map<int, FeatureMap> grads;
  /// Gradient with respect to point features (pixel_point_infonce only).
  PointFeatures point_grads;
};

inline constexpr int kAnchorSide = 0;
inline constexpr int kPositiveSide = 1;

/// Divides every pixel vector by max(|v|, 1e-12) and sets the normalized flag.
FeatureMap normalize(const FeatureMap& raw);

/// InfoNCE over pixel matches. For each pair (i, j) the anchor is f_m at i,
/// the positive is f_n at j and the denominator runs over the n-side
/// features of every pair. Returns the mean over pairs; gradients are with
/// respect to the normalized features.
LossOutput pixel_infonce(const FeatureMap& f_m, const FeatureMap& f_n,
                         std::span<const PixelPair> matches, Temperature tau = {});

/// pixel_infonce with one shared denominator across the matches of several
/// view pairs. Gradients are keyed by view id.
LossOutput pixel_infonce_batch(const std::map<int, FeatureMap>& features,
                               std::span<const MatchIndex> matches, Temperature tau = {});

/// Pixel features that share one aggregate.
Eigen::VectorXd aggregate(const FeatureMap& f, std::span<const Pixel> pixels,
                          const Aggregator& agg, AggregateKey key = {});

/// Index into `count` members chosen by an ArbitraryPoint aggregator.
std::size_t arbitrary_member(const Aggregator& agg, AggregateKey key, std::size_t count);

/// Set-level InfoNCE over matched geometric consistency sets. For tuple
/// (i, m, n) the anchor aggregates P_i in view m with `agg_anchor` and the
/// positive aggregates P_i in view n with `agg_positive`. The other terms
/// of the denominator are the n-side projections of every other tuple,
/// aggregated with `agg_anchor`. Returns the mean over tuples.
LossOutput set_infonce(const std::map<int, FeatureMap>& features,
                       const ProjectedGeoSets& projections,
                       std::span<const SetTuple> tuples, Temperature tau = {},
                       const Aggregator& agg_anchor = Aggregator::mean(),
                       const Aggregator& agg_positive = Aggregator::mean());

struct PointMatch {
  Pixel pixel;
  std::uint32_t point = 0;
};

/// pixel_infonce with the positive side replaced by 3D point features.
LossOutput pixel_point_infonce(const FeatureMap& f_2d, const PointFeatures& point_features,
                               std::span<const PointMatch> matches, Temperature tau = {});

}  // namespace geoset
