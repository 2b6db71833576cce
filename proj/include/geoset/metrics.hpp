#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "geoset/contrast.hpp"
#include "geoset/types.hpp"

namespace geoset {

inline constexpr double kDefaultCodingEpsilon = 0.5;
inline constexpr std::int32_t kUnlabeled = -1;

/// R(F, eps) = 1/2 log det(I + d / (m eps^2) F F^T) for a d x m matrix,
/// evaluated on the smaller Gram side with a Cholesky factorization.
double coding_rate(const Eigen::MatrixXd& features, double epsilon = kDefaultCodingEpsilon);

struct ScaledFeatures {
  Eigen::MatrixXd features;
  bool degenerate = false;  // mean column norm below 1e-12; returned unscaled
};

ScaledFeatures scale_by_mean_length(const Eigen::MatrixXd& features);

/// Mean coding rate over the label groups of one image after scaling all
/// pixel features by their mean length. Pixels labeled kUnlabeled are
/// ignored.
double per_image_coding_rate(const FeatureMap& f, std::span<const std::int32_t> labels,
                             double epsilon = kDefaultCodingEpsilon);

/// Per-pixel category map taking each projected pixel's set id.
std::vector<std::int32_t> set_label_map(const ViewProjection& projection);

/// Mean over sets (with >= 2 pixels) of the mean pairwise cosine similarity.
double intra_set_cosine(const FeatureMap& f, const ViewProjection& projection);

/// Mean over pairs of distinct sets of the mean cosine between their pixels.
double cross_set_cosine(const FeatureMap& f, const ViewProjection& projection);

/// Projects pixel features onto the top three principal components and
/// min-max normalizes each channel into [0, 1]. Output is H x W x 3,
/// row-major. Channels without variance are filled with 0.5.
std::vector<double> pca_embed(const FeatureMap& f);

}  // namespace geoset
