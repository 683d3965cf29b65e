#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "simfuse/subset_mask.hpp"

namespace simfuse {

struct LayerShape {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;

  std::size_t size() const noexcept { return h * w * c; }
  bool operator==(const LayerShape&) const = default;
};

/// One layer's activations, laid out [h][w][c].
struct ActivationLayer {
  LayerShape shape;
  std::vector<float> values;

  std::span<const float> at(std::size_t y, std::size_t x) const {
    return {values.data() + (y * shape.w + x) * shape.c, shape.c};
  }
  bool operator==(const ActivationLayer&) const = default;
};

struct ActivationStack {
  std::vector<ActivationLayer> layers;

  std::vector<LayerShape> shapes() const;
  bool operator==(const ActivationStack&) const = default;
};

/// Throws DataError if any dimension is zero, a layer's value count is
/// wrong, or an entry is non-finite.
void check_activation_stack(const ActivationStack& s);

/// Per-channel, non-negative weights for every layer.
struct LayerWeights {
  std::vector<std::vector<double>> per_layer;

  /// All-ones weights matching `shapes`.
  static LayerWeights uniform(std::span<const LayerShape> shapes);
  bool operator==(const LayerWeights&) const = default;
};

/// Channel vectors with a smaller norm normalize to zero.
inline constexpr double kMinChannelNorm = 1e-10;
/// |d0 - d1| at or below this is a tie.
inline constexpr double kTieTolerance = 1e-12;

/// Divides every spatial position's channel vector by its L2 norm.
ActivationStack channel_normalize(const ActivationStack& s);

/// sum_l 1/(H_l W_l) sum_{h,w} || w_l .* (x_hw - x0_hw) ||^2, in double.
/// Inputs are used as given (normalize first). Throws std::invalid_argument
/// on a shape or weight mismatch.
double weighted_layer_distance(const ActivationStack& x, const ActivationStack& x0,
                               const LayerWeights& w);

/// Ones for `layer`, zeros everywhere else.
LayerWeights single_layer_selector(const LayerWeights& w, std::size_t layer);

enum class Choice { p0, p1, tie };

/// A reference patch, two distortions and the fraction of people who
/// judged p1 closer to the reference.
struct Triple2AFC {
  std::string item_id;
  ActivationStack ref;
  ActivationStack p0;
  ActivationStack p1;
  double human_pref = 0.5;
};

/// p0 if d0 < d1, p1 if d0 > d1, tie when |d0 - d1| <= kTieTolerance.
Choice judge_distances(double d0, double d1) noexcept;

/// Judges with weighted_layer_distance; stacks should be channel-normalized.
Choice judge_2afc(const Triple2AFC& t, const LayerWeights& w);

/// Fraction of people agreeing with `choice`; 0.5 for a tie.
double agreement_credit(Choice choice, double human_pref) noexcept;

struct TwoAFCScore {
  std::string distortion;
  double score = 0.0;
  std::size_t n_items = 0;
};

TwoAFCScore score_2afc(std::span<const Triple2AFC> items, const LayerWeights& w,
                       const std::string& distortion = {}, unsigned workers = 1);

/// Mean agreement from precomputed distances.
double score_from_distances(std::span<const double> d0, std::span<const double> d1,
                            std::span<const double> human_pref);

struct SingleLayerResult {
  std::size_t best_layer = 0;
  double best_score = 0.0;
  std::vector<double> per_layer;
};

/// Scores every single-layer selector; ties go to the lowest layer.
SingleLayerResult best_single_layer(std::span<const Triple2AFC> items, unsigned workers = 1);

/// Per metric and item, d(p0, ref) and d(p1, ref).
struct DistanceTable {
  std::vector<std::string> metrics;
  std::vector<std::string> item_ids;
  std::vector<double> human_pref;
  /// d0[metric][item], d1[metric][item]
  std::vector<std::vector<double>> d0;
  std::vector<std::vector<double>> d1;
};

/// Reads CSV with header `item_id,metric,d0,d1,human_pref`. Metrics are
/// sorted by name; items keep first-appearance order. Every metric must
/// cover the same items with the same human_pref.
DistanceTable read_distance_table_csv(std::istream& in);
void write_distance_table_csv(std::ostream& out, const DistanceTable& table);

struct MetricComboEntry {
  SubsetMask mask;
  double score = 0.0;
};

struct MetricComboResult {
  bool normalized = false;
  std::vector<MetricComboEntry> entries;
  MetricComboEntry best;
};

/// Judges every non-empty metric subset by summed distances. With
/// `normalize`, each metric's distances are z-scored over all its recorded
/// d0 and d1 values first.
MetricComboResult search_metric_combinations(const DistanceTable& table, bool normalize);

/// Activation-stack file: JSON manifest with layer shapes plus one f32
/// payload of the concatenated layers.
void write_activation_stack(const ActivationStack& s, const std::filesystem::path& manifest);
ActivationStack read_activation_stack(const std::filesystem::path& manifest);

/// A set of 2AFC items sharing one layer layout. The payload concatenates,
/// per item, the ref, p0 and p1 stacks.
void write_2afc_set(std::span<const Triple2AFC> items, const std::filesystem::path& manifest);
std::vector<Triple2AFC> read_2afc_set(const std::filesystem::path& manifest);

/// JSON `{"layers": [[w, ...], ...]}`.
LayerWeights read_layer_weights(const std::filesystem::path& path);
void write_layer_weights(const LayerWeights& w, const std::filesystem::path& path);

}  // namespace simfuse
