#include "geoset/contrast.hpp"

#include <cmath>
#include <string>

#include "geoset/error.hpp"

namespace geoset {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

FeatureMap::FeatureMap(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 1) throw InvalidArgument("invalid feature map shape");
  values_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

std::size_t FeatureMap::offset(Pixel p) const {
  if (!contains(p))
    throw InvalidArgument("pixel (" + std::to_string(p.u) + ", " + std::to_string(p.v) +
                          ") outside feature map");
  return (static_cast<std::size_t>(p.v) * width_ + p.u) * channels_;
}

std::span<double> FeatureMap::at(Pixel p) { return {values_.data() + offset(p), static_cast<std::size_t>(channels_)}; }

std::span<const double> FeatureMap::at(Pixel p) const {
  return {values_.data() + offset(p), static_cast<std::size_t>(channels_)};
}

Eigen::Map<Eigen::VectorXd> FeatureMap::vec(Pixel p) { return {values_.data() + offset(p), channels_}; }

Eigen::Map<const Eigen::VectorXd> FeatureMap::vec(Pixel p) const {
  return {values_.data() + offset(p), channels_};
}

Temperature::Temperature(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("temperature must be positive");
}

FeatureMap normalize(const FeatureMap& raw) {
  FeatureMap out = raw;
  const auto c = static_cast<std::size_t>(raw.channels());
  auto data = out.data();
  for (std::size_t offset = 0; offset < data.size(); offset += c) {
    Eigen::Map<Eigen::VectorXd> v(data.data() + offset, static_cast<Eigen::Index>(c));
    v /= std::max(v.norm(), 1e-12);
  }
  out.set_normalized(true);
  return out;
}

namespace {

// InfoNCE over rows: term t scores anchor t against positive t and against
// negative k for every k != t.
struct NceResult {
  double loss = 0.0;
  RowMatrix grad_anchor;
  RowMatrix grad_positive;
  RowMatrix grad_negative;
};

NceResult info_nce(const RowMatrix& anchors, const RowMatrix& positives,
                   const RowMatrix& negatives, double tau) {
  const Eigen::Index n = anchors.rows();
  Eigen::MatrixXd logits = (anchors * negatives.transpose()) / tau;
  Eigen::VectorXd positive_logit = anchors.cwiseProduct(positives).rowwise().sum() / tau;
  logits.diagonal() = positive_logit;

  NceResult out;
  Eigen::MatrixXd weights(n, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double peak = logits.row(t).maxCoeff();
    weights.row(t) = (logits.row(t).array() - peak).exp().matrix();
    const double total = weights.row(t).sum();
    out.loss += peak + std::log(total) - positive_logit[t];
    weights.row(t) /= total;
  }
  out.loss /= static_cast<double>(n);

  // d loss / d logits = (softmax - identity) / n.
  weights.diagonal().array() -= 1.0;
  weights /= static_cast<double>(n);
  const Eigen::VectorXd diag = weights.diagonal();
  weights.diagonal().setZero();

  out.grad_anchor = (weights * negatives + diag.asDiagonal() * positives) / tau;
  out.grad_negative = (weights.transpose() * anchors) / tau;
  out.grad_positive = (diag.asDiagonal() * anchors) / tau;
  return out;
}

void require_normalized(const FeatureMap& f, const char* what) {
  if (!f.normalized()) throw InvalidArgument(std::string(what) + " must be normalized");
}

FeatureMap zeros_like(const FeatureMap& f) {
  FeatureMap g(f.height(), f.width(), f.channels());
  return g;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

LossOutput pixel_infonce(const FeatureMap& f_m, const FeatureMap& f_n,
                         std::span<const PixelPair> matches, Temperature tau) {
  if (matches.empty()) throw Error("no matches");
  require_normalized(f_m, "anchor feature map");
  require_normalized(f_n, "positive feature map");
  if (f_m.channels() != f_n.channels()) throw InvalidArgument("feature maps differ in channel count");

  const auto n = static_cast<Eigen::Index>(matches.size());
  RowMatrix anchors(n, f_m.channels());
  RowMatrix positives(n, f_n.channels());
  for (Eigen::Index t = 0; t < n; ++t) {
    anchors.row(t) = f_m.vec(matches[t].m).transpose();
    positives.row(t) = f_n.vec(matches[t].n).transpose();
  }
  const auto nce = info_nce(anchors, positives, positives, tau.value());

  LossOutput out;
  out.loss = nce.loss;
  FeatureMap grad_m = zeros_like(f_m);
  FeatureMap grad_n = zeros_like(f_n);
  for (Eigen::Index t = 0; t < n; ++t) {
    grad_m.vec(matches[t].m) += nce.grad_anchor.row(t).transpose();
    grad_n.vec(matches[t].n) += (nce.grad_positive.row(t) + nce.grad_negative.row(t)).transpose();
  }
  out.grads.emplace(kAnchorSide, std::move(grad_m));
  out.grads.emplace(kPositiveSide, std::move(grad_n));
  return out;
}

LossOutput pixel_infonce_batch(const std::map<int, FeatureMap>& features,
                               std::span<const MatchIndex> matches, Temperature tau) {
  std::size_t total = 0;
  for (const auto& index : matches) total += index.pixel_pairs.size();
  if (total == 0) throw Error("no matches");

  auto lookup = [&](int view) -> const FeatureMap& {
    const auto it = features.find(view);
    if (it == features.end()) throw InvalidArgument("missing features for view " + std::to_string(view));
    require_normalized(it->second, "feature map");
    return it->second;
  };

  const int channels = features.begin()->second.channels();
  RowMatrix anchors(static_cast<Eigen::Index>(total), channels);
  RowMatrix positives(static_cast<Eigen::Index>(total), channels);
  Eigen::Index row = 0;
  for (const auto& index : matches) {
    const auto& f_m = lookup(index.view_m);
    const auto& f_n = lookup(index.view_n);
    for (const auto& pair : index.pixel_pairs) {
      anchors.row(row) = f_m.vec(pair.m).transpose();
      positives.row(row) = f_n.vec(pair.n).transpose();
      ++row;
    }
  }
  const auto nce = info_nce(anchors, positives, positives, tau.value());

  LossOutput out;
  out.loss = nce.loss;
  auto grad_for = [&](int view) -> FeatureMap& {
    auto it = out.grads.find(view);
    if (it == out.grads.end()) it = out.grads.emplace(view, zeros_like(lookup(view))).first;
    return it->second;
  };
  row = 0;
  for (const auto& index : matches) {
    for (const auto& pair : index.pixel_pairs) {
      grad_for(index.view_m).vec(pair.m) += nce.grad_anchor.row(row).transpose();
      grad_for(index.view_n).vec(pair.n) +=
          (nce.grad_positive.row(row) + nce.grad_negative.row(row)).transpose();
      ++row;
    }
  }
  return out;
}

std::size_t arbitrary_member(const Aggregator& agg, AggregateKey key, std::size_t count) {
  if (count == 0) throw InvalidArgument("cannot pick from an empty set");
  std::uint64_t h = splitmix64(agg.seed);
  h = splitmix64(h ^ key.set);
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(key.view)));
  return static_cast<std::size_t>(h % count);
}

Eigen::VectorXd aggregate(const FeatureMap& f, std::span<const Pixel> pixels, const Aggregator& agg,
                          AggregateKey key) {
  if (pixels.empty()) throw InvalidArgument("cannot aggregate an empty pixel list");
  if (agg.kind == Aggregator::Kind::ArbitraryPoint)
    return f.vec(pixels[arbitrary_member(agg, key, pixels.size())]);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f.channels());
  for (const auto& p : pixels) sum += f.vec(p);
  return sum / static_cast<double>(pixels.size());
}

namespace {

std::vector<Pixel> set_pixels(const ProjectedGeoSets& projections, const SetTuple& tuple, int view) {
  auto describe = [&] {
    return "tuple (set " + std::to_string(tuple.set) + ", view " + std::to_string(tuple.view_m) +
           ", view " + std::to_string(tuple.view_n) + ")";
  };
  const auto vit = projections.find(view);
  if (vit == projections.end())
    throw Error(describe() + ": no projections for view " + std::to_string(view));
  const auto sit = vit->second.sets.find(tuple.set);
  if (sit == vit->second.sets.end() || sit->second.empty())
    throw Error(describe() + ": set absent from view " + std::to_string(view) + " projections");
  std::vector<Pixel> out;
  out.reserve(sit->second.size());
  for (const auto& p : sit->second) out.push_back(p.pixel);
  return out;
}

// Adds d aggregate / d pixel features, scaled by `grad`, into `target`.
void scatter(FeatureMap& target, std::span<const Pixel> pixels, const Aggregator& agg,
             AggregateKey key, const Eigen::VectorXd& grad) {
  if (agg.kind == Aggregator::Kind::ArbitraryPoint) {
    target.vec(pixels[arbitrary_member(agg, key, pixels.size())]) += grad;
    return;
  }
  const Eigen::VectorXd share = grad / static_cast<double>(pixels.size());
  for (const auto& p : pixels) target.vec(p) += share;
}

}  // namespace

LossOutput set_infonce(const std::map<int, FeatureMap>& features,
                       const ProjectedGeoSets& projections, std::span<const SetTuple> tuples,
                       Temperature tau, const Aggregator& agg_anchor,
                       const Aggregator& agg_positive) {
  if (tuples.empty()) throw Error("no set tuples");
  auto lookup = [&](int view) -> const FeatureMap& {
    const auto it = features.find(view);
    if (it == features.end()) throw InvalidArgument("missing features for view " + std::to_string(view));
    require_normalized(it->second, "feature map");
    return it->second;
  };

  const auto n = static_cast<Eigen::Index>(tuples.size());
  const int channels = lookup(tuples.front().view_m).channels();
  std::vector<std::vector<Pixel>> anchor_pixels(tuples.size());
  std::vector<std::vector<Pixel>> positive_pixels(tuples.size());
  RowMatrix anchors(n, channels);
  RowMatrix positives(n, channels);
  RowMatrix negatives(n, channels);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& tuple = tuples[t];
    anchor_pixels[t] = set_pixels(projections, tuple, tuple.view_m);
    positive_pixels[t] = set_pixels(projections, tuple, tuple.view_n);
    const auto& f_m = lookup(tuple.view_m);
    const auto& f_n = lookup(tuple.view_n);
    if (f_m.channels() != channels || f_n.channels() != channels)
      throw InvalidArgument("feature maps differ in channel count");
    anchors.row(t) = aggregate(f_m, anchor_pixels[t], agg_anchor, {tuple.set, tuple.view_m}).transpose();
    positives.row(t) = aggregate(f_n, positive_pixels[t], agg_positive, {tuple.set, tuple.view_n}).transpose();
    negatives.row(t) = agg_anchor == agg_positive
                           ? Eigen::RowVectorXd(positives.row(t))
                           : aggregate(f_n, positive_pixels[t], agg_anchor, {tuple.set, tuple.view_n}).transpose();
  }
  const auto nce = info_nce(anchors, positives, negatives, tau.value());

  LossOutput out;
  out.loss = nce.loss;
  auto grad_for = [&](int view) -> FeatureMap& {
    auto it = out.grads.find(view);
    if (it == out.grads.end()) it = out.grads.emplace(view, zeros_like(lookup(view))).first;
    return it->second;
  };
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& tuple = tuples[t];
    scatter(grad_for(tuple.view_m), anchor_pixels[t], agg_anchor, {tuple.set, tuple.view_m},
            nce.grad_anchor.row(t).transpose());
    scatter(grad_for(tuple.view_n), positive_pixels[t], agg_positive, {tuple.set, tuple.view_n},
            nce.grad_positive.row(t).transpose());
    scatter(grad_for(tuple.view_n), positive_pixels[t], agg_anchor, {tuple.set, tuple.view_n},
            nce.grad_negative.row(t).transpose());
  }
  return out;
}

LossOutput pixel_point_infonce(const FeatureMap& f_2d, const PointFeatures& point_features,
                               std::span<const PointMatch> matches, Temperature tau) {
  if (matches.empty()) throw Error("no matches");
  require_normalized(f_2d, "pixel feature map");
  if (point_features.cols() != f_2d.channels())
    throw InvalidArgument("point features differ in channel count");

  const auto n = static_cast<Eigen::Index>(matches.size());
  RowMatrix anchors(n, f_2d.channels());
  RowMatrix positives(n, f_2d.channels());
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto point = static_cast<Eigen::Index>(matches[t].point);
    if (point >= point_features.rows())
      throw InvalidArgument("point index " + std::to_string(point) + " out of range");
    if (std::abs(point_features.row(point).norm() - 1.0) > 1e-3)
      throw InvalidArgument("point feature " + std::to_string(point) + " is not unit length");
    anchors.row(t) = f_2d.vec(matches[t].pixel).transpose();
    positives.row(t) = point_features.row(point);
  }
  const auto nce = info_nce(anchors, positives, positives, tau.value());

  LossOutput out;
  out.loss = nce.loss;
  FeatureMap grad = zeros_like(f_2d);
  out.point_grads = PointFeatures::Zero(point_features.rows(), point_features.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    grad.vec(matches[t].pixel) += nce.grad_anchor.row(t).transpose();
    out.point_grads.row(matches[t].point) += nce.grad_positive.row(t) + nce.grad_negative.row(t);
  }
  out.grads.emplace(kAnchorSide, std::move(grad));
  return out;
}

}  // namespace geoset
