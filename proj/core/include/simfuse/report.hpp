#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simfuse/analysis.hpp"
#include "simfuse/fusion_search.hpp"
#include "simfuse/patch_metric.hpp"

namespace simfuse {

/// Carried by every JSON report as "schema_version".
inline constexpr int kReportSchemaVersion = 1;

void write_hit_sets(const std::filesystem::path& path, const HitSets& hits,
                    const std::vector<std::string>& names);
/// Returns the hit sets and fills `names` with the stored representation order.
HitSets read_hit_sets(const std::filesystem::path& path, std::vector<std::string>& names);

struct ModeSummary {
  FusionMode mode = FusionMode::raw;
  SearchEntry best;
  std::vector<BestPoint> curve;
};

std::string search_summary_json(std::size_t n_pairs, std::size_t k,
                                const std::vector<std::string>& names,
                                const std::vector<NormStats>& stats,
                                const std::vector<ModeSummary>& modes);

struct AnalysisBundle {
  std::vector<std::string> representations;
  FusionMode mode = FusionMode::normalized;
  std::optional<ParticipationReport> participation;
  AblationReport ablation;
  std::size_t oracle = 0;
  std::vector<std::size_t> single_recalls;
  ExclusiveReport exclusive;
  /// Subset whose fused matrix the failure cases come from, if computed.
  std::optional<SubsetMask> failure_subset;
  std::vector<FailureCase> failures;
};

std::string analysis_bundle_json(const AnalysisBundle& bundle);

/// fig5a: `representation,recall`.
void write_singles_csv(std::ostream& out, const HitSets& hits,
                       const std::vector<std::string>& names);
/// fig6a: `q,representation,count,ratio`.
void write_participation_csv(std::ostream& out, const ParticipationReport& rep,
                             const std::vector<std::string>& names);
/// fig6c: `representation,recall,exclusive`.
void write_exclusive_csv(std::ostream& out, const ExclusiveReport& rep, const HitSets& hits,
                         const std::vector<std::string>& names);

/// Metric-combination search over one distance table.
struct TableCombinations {
  std::string distortion;
  std::vector<std::string> metrics;
  MetricComboResult summed;
  MetricComboResult zscored;
};

struct BappsReport {
  std::vector<TwoAFCScore> scores;
  std::optional<SingleLayerResult> single_layer;
  std::optional<double> baseline;
  std::vector<TableCombinations> tables;
};

std::string bapps_report_json(const BappsReport& report);

/// Single-layer table: `layer,score,is_best,delta_vs_baseline`; the delta
/// column is baseline - score, empty without a baseline.
void write_single_layer_csv(std::ostream& out, const SingleLayerResult& result,
                            std::optional<double> baseline);

}  // namespace simfuse
