#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoset/contrast.hpp"
#include "geoset/types.hpp"

namespace geoset {

struct TrainConfig {
  double base_lr = 0.1;
  int batch_size = 4;
  int epochs_stage1 = 5;
  int epochs_stage2 = 2;
  double poly_power = 0.9;
  double tau = Temperature::kDefault;
  std::uint64_t seed = 0;
  Aggregator agg_anchor = Aggregator::mean();
  Aggregator agg_positive = Aggregator::mean();
  int channels = 16;
  double init_scale = 3e-4;  // std-dev of the initial raw embeddings
  double momentum = 0.0;
  /// Share one softmax denominator across all pairs of a batch instead of
  /// one per view pair.
  bool batch_negatives = false;
  /// Rescale every raw vector to the initial norm before stage 2. The
  /// losses only see normalized features, so this changes the step size on
  /// the unit sphere and not the representation.
  bool reset_scale_between_stages = true;
};

/// Throws InvalidArgument when a field violates its range.
void validate(const TrainConfig& config);

/// Learnable raw (unnormalized) per-pixel features, keyed by view id.
struct EmbeddingTable {
  std::map<int, FeatureMap> views;

  bool operator==(const EmbeddingTable&) const = default;
};

/// Gaussian initialization of every view in `projections`, seeded per view.
EmbeddingTable init_embeddings(const ProjectedGeoSets& projections, int channels,
                               double scale, std::uint64_t seed);

/// Rescales every raw vector to length `norm`, keeping its direction.
void rescale_table(EmbeddingTable& table, double norm);

/// PolyLR: base * (1 - iter / max_iter)^power.
double poly_lr(double base, long iter, long max_iter, double power);

/// Chains a gradient taken with respect to normalize(raw) back to raw.
FeatureMap chain_normalize(const FeatureMap& raw, const FeatureMap& grad_normalized);

/// SGD with optional heavy-ball momentum. Velocity buffers live here so a
/// fresh optimizer is a fresh object.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.0) : momentum_(momentum) {}

  /// params <- params - lr * (grad chained through normalize). Gradients
  /// are with respect to normalized features. Throws Error on a non-finite
  /// gradient entry, leaving the table untouched.
  void step(EmbeddingTable& table, const std::map<int, FeatureMap>& grads, double lr);

 private:
  double momentum_;
  std::map<int, std::vector<double>> velocity_;
};

struct TrainDataset {
  ProjectedGeoSets projections;
  std::vector<MatchIndex> pairs;
  /// Optional features of the 3D points, enabling the pixel-to-point loss.
  std::optional<PointFeatures> point_features;
};

struct LogRecord {
  int stage = 0;
  int epoch = 0;
  long step = 0;
  std::string kind;  // "pixel", "pixel_point", "set" or "epoch"
  double loss = 0.0;
  double lr = 0.0;
  double intra_set_cosine = 0.0;  // "epoch" records only
  double cross_set_cosine = 0.0;  // "epoch" records only

  bool operator==(const LogRecord&) const = default;
};

struct TrainResult {
  EmbeddingTable table;
  std::vector<LogRecord> log;
};

/// Mean intra-set and cross-set cosine of the normalized table, averaged
/// over views.
std::pair<double, double> evaluate_cohesion(const EmbeddingTable& table,
                                            const ProjectedGeoSets& projections);

/// Stage 1 minimizes the pixel losses, stage 2 the set loss alone. The
/// learning rate schedule and optimizer state restart at the stage boundary.
TrainResult run_two_stage(const TrainDataset& dataset, const TrainConfig& config);

/// Same, continuing from an existing table.
TrainResult run_two_stage(const TrainDataset& dataset, const TrainConfig& config,
                          EmbeddingTable initial);

}  // namespace geoset
