#include "geoset/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "geoset/error.hpp"
#include "geoset/metrics.hpp"

namespace geoset {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void accumulate(std::map<int, FeatureMap>& into, std::map<int, FeatureMap>&& grads, double scale) {
  for (auto& [view, grad] : grads) {
    auto data = grad.data();
    for (auto& g : data) g *= scale;
    auto it = into.find(view);
    if (it == into.end()) {
      into.emplace(view, std::move(grad));
      continue;
    }
    auto target = it->second.data();
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += data[i];
  }
}

}  // namespace

void validate(const TrainConfig& config) {
  if (!(config.base_lr > 0.0)) throw InvalidArgument("base_lr must be positive");
  if (config.batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (config.epochs_stage1 < 0 || config.epochs_stage2 < 0) throw InvalidArgument("epochs must be non-negative");
  if (!(config.poly_power >= 0.0)) throw InvalidArgument("poly_power must be non-negative");
  if (config.channels < 1) throw InvalidArgument("channels must be at least 1");
  if (!(config.init_scale > 0.0)) throw InvalidArgument("init_scale must be positive");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
  Temperature{config.tau};
}

EmbeddingTable init_embeddings(const ProjectedGeoSets& projections, int channels, double scale,
                               std::uint64_t seed) {
  EmbeddingTable table;
  for (const auto& [view, projection] : projections) {
    FeatureMap raw(projection.height, projection.width, channels);
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint32_t>(view)));
    std::normal_distribution<double> gauss(0.0, scale);
    for (auto& x : raw.data()) x = gauss(rng);
    table.views.emplace(view, std::move(raw));
  }
  return table;
}

double poly_lr(double base, long iter, long max_iter, double power) {
  if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  if (iter < 0 || iter > max_iter) throw InvalidArgument("iter must lie in [0, max_iter]");
  return base * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iter), power);
}

void rescale_table(EmbeddingTable& table, double norm) {
  for (auto& [view, raw] : table.views) {
    const FeatureMap unit = normalize(raw);
    auto out = raw.data();
    const auto in = unit.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * norm;
  }
}

FeatureMap chain_normalize(const FeatureMap& raw, const FeatureMap& grad_normalized) {
  if (!raw.same_shape(grad_normalized)) throw InvalidArgument("gradient shape does not match the table");
  FeatureMap out(raw.height(), raw.width(), raw.channels());
  const auto c = static_cast<Eigen::Index>(raw.channels());
  const auto x_all = raw.data();
  const auto g_all = grad_normalized.data();
  auto o_all = out.data();
  for (std::size_t offset = 0; offset < x_all.size(); offset += static_cast<std::size_t>(c)) {
    const Eigen::Map<const Eigen::VectorXd> x(x_all.data() + offset, c);
    const Eigen::Map<const Eigen::VectorXd> g(g_all.data() + offset, c);
    Eigen::Map<Eigen::VectorXd> o(o_all.data() + offset, c);
    const double norm = x.norm();
    if (norm < 1e-12) {
      o = g / 1e-12;  // normalize is the linear map x / 1e-12 here
      continue;
    }
    const Eigen::VectorXd y = x / norm;
    o = (g - y * y.dot(g)) / norm;
  }
  return out;
}

void SgdOptimizer::step(EmbeddingTable& table, const std::map<int, FeatureMap>& grads, double lr) {
  for (const auto& [view, grad] : grads) {
    const auto it = table.views.find(view);
    if (it == table.views.end()) throw InvalidArgument("gradient for unknown view " + std::to_string(view));
    if (!it->second.same_shape(grad)) throw InvalidArgument("gradient shape does not match view " + std::to_string(view));
    const auto data = grad.data();
    const auto bad = std::find_if(data.begin(), data.end(), [](double g) { return !std::isfinite(g); });
    if (bad != data.end())
      throw Error("non-finite gradient in view " + std::to_string(view) + " at element " +
                  std::to_string(bad - data.begin()));
  }
  for (const auto& [view, grad] : grads) {
    FeatureMap& params = table.views.at(view);
    const FeatureMap raw_grad = chain_normalize(params, grad);
    auto p = params.data();
    const auto g = raw_grad.data();
    if (momentum_ > 0.0) {
      auto& v = velocity_[view];
      v.resize(p.size(), 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i];
        p[i] -= lr * v[i];
      }
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
  }
}

std::pair<double, double> evaluate_cohesion(const EmbeddingTable& table,
                                            const ProjectedGeoSets& projections) {
  double intra = 0.0, cross = 0.0;
  std::size_t intra_views = 0, cross_views = 0;
  for (const auto& [view, projection] : projections) {
    const auto it = table.views.find(view);
    if (it == table.views.end()) continue;
    const bool has_pairs = std::any_of(projection.sets.begin(), projection.sets.end(),
                                       [](const auto& entry) { return entry.second.size() >= 2; });
    if (has_pairs) {
      intra += intra_set_cosine(it->second, projection);
      ++intra_views;
    }
    if (projection.sets.size() >= 2) {
      cross += cross_set_cosine(it->second, projection);
      ++cross_views;
    }
  }
  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  return {intra_views ? intra / static_cast<double>(intra_views) : kNan,
          cross_views ? cross / static_cast<double>(cross_views) : kNan};
}

namespace {

class TwoStageRun {
 public:
  TwoStageRun(const TrainDataset& dataset, const TrainConfig& config, EmbeddingTable table)
      : data_(dataset), config_(config), tau_(config.tau) {
    result_.table = std::move(table);
  }

  TrainResult run() {
    run_stage(1, config_.epochs_stage1);
    if (config_.epochs_stage1 > 0 && config_.epochs_stage2 > 0 && config_.reset_scale_between_stages)
      rescale_table(result_.table, config_.init_scale * std::sqrt(static_cast<double>(config_.channels)));
    run_stage(2, config_.epochs_stage2);
    return std::move(result_);
  }

 private:
  void run_stage(int stage, int epochs) {
    if (epochs == 0) return;
    const std::size_t pairs = data_.pairs.size();
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    const long steps_per_epoch = static_cast<long>((pairs + batch - 1) / batch);
    const long max_iter = steps_per_epoch * epochs;
    SgdOptimizer optimizer(config_.momentum);
    long iter = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::vector<std::size_t> order(pairs);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(mix_seed(config_.seed, static_cast<std::uint64_t>(stage) * 1000003u + epoch));
      std::shuffle(order.begin(), order.end(), rng);

      for (std::size_t start = 0; start < pairs; start += batch, ++iter) {
        const std::span<const std::size_t> members(order.data() + start, std::min(batch, pairs - start));
        const double lr = poly_lr(config_.base_lr, iter, max_iter, config_.poly_power);
        std::map<int, FeatureMap> grads;
        if (stage == 1) {
          stage_one_step(members, stage, epoch, iter, lr, grads);
        } else {
          stage_two_step(members, stage, epoch, iter, lr, grads);
        }
        if (!grads.empty()) optimizer.step(result_.table, grads, lr);
      }
      const auto [intra, cross] = evaluate_cohesion(result_.table, data_.projections);
      LogRecord record;
      record.stage = stage;
      record.epoch = epoch;
      record.step = iter;
      record.kind = "epoch";
      record.intra_set_cosine = intra;
      record.cross_set_cosine = cross;
      result_.log.push_back(record);
    }
  }

  std::map<int, FeatureMap> normalized_views(std::span<const std::size_t> members) const {
    std::map<int, FeatureMap> out;
    for (auto index : members) {
      for (int view : {data_.pairs[index].view_m, data_.pairs[index].view_n}) {
        if (out.contains(view)) continue;
        const auto it = result_.table.views.find(view);
        if (it == result_.table.views.end())
          throw InvalidArgument("pair references view " + std::to_string(view) + " without embeddings");
        out.emplace(view, normalize(it->second));
      }
    }
    return out;
  }

  void log_loss(int stage, int epoch, long iter, const char* kind, double loss, double lr) {
    result_.log.push_back({stage, epoch, iter, kind, loss, lr, 0.0, 0.0});
  }

  void stage_one_step(std::span<const std::size_t> members, int stage, int epoch, long iter, double lr,
                      std::map<int, FeatureMap>& grads) {
    const auto features = normalized_views(members);
    std::vector<MatchIndex> used;
    for (auto index : members) {
      if (!data_.pairs[index].pixel_pairs.empty()) used.push_back(data_.pairs[index]);
    }
    if (used.empty()) return;

    double pixel_loss = 0.0;
    if (config_.batch_negatives) {
      auto out = pixel_infonce_batch(features, used, tau_);
      pixel_loss = out.loss;
      accumulate(grads, std::move(out.grads), 1.0);
    } else {
      const double share = 1.0 / static_cast<double>(used.size());
      for (const auto& match : used) {
        auto out = pixel_infonce(features.at(match.view_m), features.at(match.view_n), match.pixel_pairs, tau_);
        pixel_loss += share * out.loss;
        std::map<int, FeatureMap> keyed;
        keyed.emplace(match.view_m, std::move(out.grads.at(kAnchorSide)));
        accumulate(grads, std::move(keyed), share);
        keyed.clear();
        keyed.emplace(match.view_n, std::move(out.grads.at(kPositiveSide)));
        accumulate(grads, std::move(keyed), share);
      }
    }
    log_loss(stage, epoch, iter, "pixel", pixel_loss, lr);

    if (!data_.point_features) return;
    // Each side of every pair contrasts its pixels against the 3D point
    // features of the shared points.
    double point_loss = 0.0;
    const double share = 1.0 / static_cast<double>(2 * used.size());
    for (const auto& match : used) {
      for (const bool anchor_side : {true, false}) {
        std::vector<PointMatch> point_matches;
        point_matches.reserve(match.pixel_pairs.size());
        for (const auto& pair : match.pixel_pairs)
          point_matches.push_back({anchor_side ? pair.m : pair.n, pair.point});
        const int view = anchor_side ? match.view_m : match.view_n;
        auto out = pixel_point_infonce(features.at(view), *data_.point_features, point_matches, tau_);
        point_loss += share * out.loss;
        std::map<int, FeatureMap> keyed;
        keyed.emplace(view, std::move(out.grads.at(kAnchorSide)));
        accumulate(grads, std::move(keyed), share);
      }
    }
    log_loss(stage, epoch, iter, "pixel_point", point_loss, lr);
  }

  void stage_two_step(std::span<const std::size_t> members, int stage, int epoch, long iter, double lr,
                      std::map<int, FeatureMap>& grads) {
    const auto features = normalized_views(members);
    std::vector<const MatchIndex*> used;
    for (auto index : members) {
      if (!data_.pairs[index].set_tuples.empty()) used.push_back(&data_.pairs[index]);
    }
    if (used.empty()) return;

    double loss = 0.0;
    if (config_.batch_negatives) {
      std::vector<SetTuple> tuples;
      for (const auto* match : used) tuples.insert(tuples.end(), match->set_tuples.begin(), match->set_tuples.end());
      auto out = set_infonce(features, data_.projections, tuples, tau_, config_.agg_anchor, config_.agg_positive);
      loss = out.loss;
      accumulate(grads, std::move(out.grads), 1.0);
    } else {
      const double share = 1.0 / static_cast<double>(used.size());
      for (const auto* match : used) {
        auto out = set_infonce(features, data_.projections, match->set_tuples, tau_, config_.agg_anchor,
                               config_.agg_positive);
        loss += share * out.loss;
        accumulate(grads, std::move(out.grads), share);
      }
    }
    log_loss(stage, epoch, iter, "set", loss, lr);
  }

  const TrainDataset& data_;
  const TrainConfig& config_;
  Temperature tau_;
  TrainResult result_;
};

}  // namespace

TrainResult run_two_stage(const TrainDataset& dataset, const TrainConfig& config) {
  validate(config);
  return run_two_stage(dataset, config,
                       init_embeddings(dataset.projections, config.channels, config.init_scale, config.seed));
}

TrainResult run_two_stage(const TrainDataset& dataset, const TrainConfig& config, EmbeddingTable initial) {
  validate(config);
  if (dataset.pairs.empty() || dataset.projections.empty()) throw Error("empty dataset");
  return TwoStageRun(dataset, config, std::move(initial)).run();
}

}  // namespace geoset
