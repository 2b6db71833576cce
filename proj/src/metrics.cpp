#include "geoset/metrics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>

#include "geoset/error.hpp"

namespace geoset {

double coding_rate(const Eigen::MatrixXd& features, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("coding rate epsilon must be positive");
  const Eigen::Index d = features.rows();
  const Eigen::Index m = features.cols();
  if (d < 1 || m < 1) throw InvalidArgument("coding rate needs a non-empty feature matrix");
  if (!features.allFinite()) throw InvalidArgument("coding rate input has non-finite entries");

  const double alpha = static_cast<double>(d) / (static_cast<double>(m) * epsilon * epsilon);
  // det(I_d + a F F^T) = det(I_m + a F^T F); factor the smaller side.
  Eigen::MatrixXd gram = d <= m ? Eigen::MatrixXd(features * features.transpose())
                                : Eigen::MatrixXd(features.transpose() * features);
  gram *= alpha;
  gram.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw Error("coding rate factorization failed");
  return llt.matrixLLT().diagonal().array().log().sum();  // 1/2 * 2 * sum log L_ii
}

ScaledFeatures scale_by_mean_length(const Eigen::MatrixXd& features) {
  if (features.cols() < 1) throw InvalidArgument("cannot scale an empty feature matrix");
  const double mean = features.colwise().norm().mean();
  if (!(mean >= 1e-12)) return {features, true};
  return {features / mean, false};
}

double per_image_coding_rate(const FeatureMap& f, std::span<const std::int32_t> labels, double epsilon) {
  const auto pixels = static_cast<std::size_t>(f.height()) * f.width();
  if (labels.size() != pixels) throw InvalidArgument("label map does not match the feature map");

  const Eigen::Map<const Eigen::MatrixXd> all(f.data().data(), f.channels(), static_cast<Eigen::Index>(pixels));
  const Eigen::MatrixXd scaled = scale_by_mean_length(all).features;

  std::map<std::int32_t, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (labels[i] != kUnlabeled) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  if (groups.empty()) throw InvalidArgument("image has no labeled pixels");

  double total = 0.0;
  for (const auto& [label, members] : groups) {
    Eigen::MatrixXd block(f.channels(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t j = 0; j < members.size(); ++j) block.col(static_cast<Eigen::Index>(j)) = scaled.col(members[j]);
    total += coding_rate(block, epsilon);
  }
  return total / static_cast<double>(groups.size());
}

std::vector<std::int32_t> set_label_map(const ViewProjection& projection) {
  std::vector<std::int32_t> labels(static_cast<std::size_t>(projection.width) * projection.height, kUnlabeled);
  for (const auto& [set, pixels] : projection.sets) {
    for (const auto& p : pixels)
      labels[static_cast<std::size_t>(p.pixel.v) * projection.width + p.pixel.u] = static_cast<std::int32_t>(set);
  }
  return labels;
}

namespace {

Eigen::VectorXd unit(const FeatureMap& f, Pixel p) {
  Eigen::VectorXd v = f.vec(p);
  return v / std::max(v.norm(), 1e-12);
}

}  // namespace

double intra_set_cosine(const FeatureMap& f, const ViewProjection& projection) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& [set, pixels] : projection.sets) {
    if (pixels.size() < 2) continue;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(f.channels());
    double self = 0.0;
    for (const auto& p : pixels) {
      const Eigen::VectorXd y = unit(f, p.pixel);
      sum += y;
      self += y.squaredNorm();
    }
    const double n = static_cast<double>(pixels.size());
    total += (sum.squaredNorm() - self) / (n * (n - 1.0));
    ++counted;
  }
  if (counted == 0) throw InvalidArgument("no set has two or more pixels");
  return total / static_cast<double>(counted);
}

double cross_set_cosine(const FeatureMap& f, const ViewProjection& projection) {
  std::vector<Eigen::VectorXd> means;
  for (const auto& [set, pixels] : projection.sets) {
    if (pixels.empty()) continue;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(f.channels());
    for (const auto& p : pixels) sum += unit(f, p.pixel);
    means.push_back(sum / static_cast<double>(pixels.size()));
  }
  if (means.size() < 2) throw InvalidArgument("cross-set cosine needs at least two sets");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < means.size(); ++a) {
    for (std::size_t b = a + 1; b < means.size(); ++b, ++pairs) total += means[a].dot(means[b]);
  }
  return total / static_cast<double>(pairs);
}

std::vector<double> pca_embed(const FeatureMap& f) {
  if (f.channels() < 3) throw InvalidArgument("PCA embedding needs at least 3 channels");
  const auto pixels = static_cast<Eigen::Index>(f.height()) * f.width();
  std::vector<double> out(static_cast<std::size_t>(pixels) * 3, 0.5);
  if (pixels == 0) return out;

  const Eigen::Map<const Eigen::MatrixXd> x(f.data().data(), f.channels(), pixels);
  const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(pixels);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::Index c = f.channels();
  const double largest = solver.eigenvalues()[c - 1];

  for (int channel = 0; channel < 3; ++channel) {
    const Eigen::Index k = c - 1 - channel;
    const double lambda = solver.eigenvalues()[k];
    if (!(lambda > std::max(1e-12 * largest, 1e-18))) continue;
    Eigen::VectorXd axis = solver.eigenvectors().col(k);
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis[pivot] < 0.0) axis = -axis;
    const Eigen::VectorXd score = centered.transpose() * axis;
    const double lo = score.minCoeff();
    const double range = score.maxCoeff() - lo;
    if (!(range > 0.0)) continue;
    for (Eigen::Index i = 0; i < pixels; ++i)
      out[static_cast<std::size_t>(i) * 3 + channel] = std::clamp((score[i] - lo) / range, 0.0, 1.0);
  }
  return out;
}

}  // namespace geoset
