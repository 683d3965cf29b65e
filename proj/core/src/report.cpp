#include "simfuse/report.hpp"

#include <ostream>

#include "io_util.hpp"
#include "simfuse/error.hpp"

namespace simfuse {

namespace fs = std::filesystem;
using detail::json;

namespace {

json mask_json(SubsetMask mask, const std::vector<std::string>& names) {
  json members = json::array();
  for (std::size_t m : mask.members()) {
    members.push_back(m < names.size() ? names[m] : std::to_string(m));
  }
  return json{{"bits", mask.bits()}, {"members", members}};
}

std::string name_of(std::size_t m, const std::vector<std::string>& names) {
  return m < names.size() ? names[m] : "#" + std::to_string(m);
}

}  // namespace

void write_hit_sets(const fs::path& path, const HitSets& hits,
                    const std::vector<std::string>& names) {
  json sets = json::array();
  for (std::size_t m = 0; m < hits.hits.size(); ++m) {
    json idx = json::array();
    for (std::size_t i = 0; i < hits.n; ++i) {
      if (hits.hits[m][i]) {
        idx.push_back(i);
      }
    }
    sets.push_back({{"representation", name_of(m, names)}, {"hits", idx}});
  }
  detail::write_json_file(path, json{{"schema_version", kReportSchemaVersion},
                                     {"n", hits.n},
                                     {"hit_sets", sets}});
}

HitSets read_hit_sets(const fs::path& path, std::vector<std::string>& names) {
  const json doc = detail::read_json_file(path);
  HitSets h;
  h.n = detail::field<std::size_t>(doc, "n", path);
  names.clear();
  for (const auto& entry : detail::field<json>(doc, "hit_sets", path)) {
    names.push_back(detail::field<std::string>(entry, "representation", path));
    std::vector<bool> v(h.n, false);
    for (std::size_t i : detail::field<std::vector<std::size_t>>(entry, "hits", path)) {
      if (i >= h.n) {
        throw DataError("'" + path.string() + "': hit index " + std::to_string(i) + " >= n");
      }
      v[i] = true;
    }
    h.hits.push_back(std::move(v));
  }
  return h;
}

std::string search_summary_json(std::size_t n_pairs, std::size_t k,
                                const std::vector<std::string>& names,
                                const std::vector<NormStats>& stats,
                                const std::vector<ModeSummary>& modes) {
  json out{{"schema_version", kReportSchemaVersion},
           {"n_pairs", n_pairs},
           {"recall_k", k},
           {"representations", names},
           {"n_subsets", (std::size_t{1} << names.size()) - 1}};
  json norm = json::array();
  for (std::size_t m = 0; m < stats.size(); ++m) {
    norm.push_back({{"representation", name_of(m, names)}, {"mean", stats[m].mean}, {"std", stats[m].std}});
  }
  out["norm_stats"] = norm;
  json per_mode = json::object();
  for (const auto& s : modes) {
    json curve = json::array();
    for (const auto& p : s.curve) {
      curve.push_back({{"n_r", p.size}, {"best_recall", p.recall}, {"subset", mask_json(p.mask, names)}});
    }
    per_mode[std::string(to_string(s.mode))] = {{"mode", to_string(s.mode)},
                                                {"best_recall", s.best.recall},
                                                {"best_subset", mask_json(s.best.mask, names)},
                                                {"best_per_size", curve}};
  }
  out["modes"] = per_mode;
  return out.dump(2) + "\n";
}

std::string analysis_bundle_json(const AnalysisBundle& b) {
  const auto& names = b.representations;
  json out{{"schema_version", kReportSchemaVersion},
           {"mode", to_string(b.mode)},
           {"representations", names}};

  if (b.participation) {
    const auto& p = *b.participation;
    json leading = json::array();
    for (SubsetMask mask : p.leading) {
      leading.push_back(mask_json(mask, names));
    }
    json per_q = json::array();
    for (std::size_t q = 1; q <= p.q_max; ++q) {
      json counts = json::object();
      json ratios = json::object();
      for (std::size_t m = 0; m < p.m; ++m) {
        counts[name_of(m, names)] = p.counts[q - 1][m];
        ratios[name_of(m, names)] = p.ratio(q, m);
      }
      per_q.push_back({{"q", q}, {"counts", counts}, {"ratios", ratios}});
    }
    out["participation"] = {{"size_filter", p.size_filter},
                            {"q_max", p.q_max},
                            {"leading", leading},
                            {"by_q", per_q}};
  } else {
    out["participation"] = nullptr;
  }

  json rows = json::array();
  for (const auto& r : b.ablation.rows) {
    rows.push_back({{"removed", name_of(r.removed, names)},
                    {"best_recall", r.best_recall},
                    {"best_subset", mask_json(r.best_mask, names)},
                    {"delta", r.delta}});
  }
  out["ablation"] = {{"base_subset", mask_json(b.ablation.base_mask, names)},
                     {"base_recall", b.ablation.base_recall},
                     {"scope", b.ablation.scope == AblationScope::all_sizes ? "all_sizes" : "same_size"},
                     {"rows", rows}};

  out["oracle"] = {{"recall", b.oracle}, {"single_recalls", json::object()}};
  for (std::size_t m = 0; m < b.single_recalls.size(); ++m) {
    out["oracle"]["single_recalls"][name_of(m, names)] = b.single_recalls[m];
  }

  json per = json::object();
  for (std::size_t m = 0; m < b.exclusive.per_repr.size(); ++m) {
    per[name_of(m, names)] = b.exclusive.per_repr[m];
  }
  out["exclusive"] = {{"per_representation", per},
                      {"total_exclusive", b.exclusive.total_exclusive},
                      {"union_count", b.exclusive.union_count}};

  if (b.failure_subset) {
    json cases = json::array();
    for (const auto& f : b.failures) {
      cases.push_back({{"query", f.query}, {"top", f.top}, {"ground_truth_rank", f.ground_truth_rank}});
    }
    out["failures"] = {{"subset", mask_json(*b.failure_subset, names)},
                       {"count", b.failures.size()},
                       {"cases", cases}};
  } else {
    out["failures"] = nullptr;
  }
  return out.dump(2) + "\n";
}

void write_singles_csv(std::ostream& out, const HitSets& hits,
                       const std::vector<std::string>& names) {
  out << "representation,recall\n";
  for (std::size_t m = 0; m < hits.hits.size(); ++m) {
    out << name_of(m, names) << ',' << hits.count(m) << '\n';
  }
}

void write_participation_csv(std::ostream& out, const ParticipationReport& rep,
                             const std::vector<std::string>& names) {
  out << "q,representation,count,ratio\n";
  for (std::size_t q = 1; q <= rep.q_max; ++q) {
    for (std::size_t m = 0; m < rep.m; ++m) {
      out << q << ',' << name_of(m, names) << ',' << rep.counts[q - 1][m] << ','
          << rep.ratio(q, m) << '\n';
    }
  }
}

void write_exclusive_csv(std::ostream& out, const ExclusiveReport& rep, const HitSets& hits,
                         const std::vector<std::string>& names) {
  out << "representation,recall,exclusive\n";
  for (std::size_t m = 0; m < rep.per_repr.size(); ++m) {
    out << name_of(m, names) << ',' << hits.count(m) << ',' << rep.per_repr[m] << '\n';
  }
}

std::string bapps_report_json(const BappsReport& r) {
  json out{{"schema_version", kReportSchemaVersion}};
  json scores = json::array();
  for (const auto& s : r.scores) {
    scores.push_back({{"distortion", s.distortion}, {"score", s.score}, {"n_items", s.n_items}});
  }
  out["scores"] = scores;
  if (r.single_layer) {
    const auto& sl = *r.single_layer;
    json single{{"best_layer", sl.best_layer},
                {"best_score", sl.best_score},
                {"per_layer", sl.per_layer}};
    if (r.baseline) {
      single["baseline"] = *r.baseline;
      single["delta"] = *r.baseline - sl.best_score;
    }
    out["single_layer"] = single;
  } else {
    out["single_layer"] = nullptr;
  }
  json combos = json::array();
  for (const auto& t : r.tables) {
    json modes = json::array();
    for (const MetricComboResult* c : {&t.summed, &t.zscored}) {
      json entries = json::array();
      for (const auto& e : c->entries) {
        entries.push_back({{"subset", mask_json(e.mask, t.metrics)}, {"score", e.score}});
      }
      modes.push_back({{"normalization", c->normalized ? "zscore" : "none"},
                       {"best_subset", mask_json(c->best.mask, t.metrics)},
                       {"best_score", c->best.score},
                       {"entries", entries}});
    }
    combos.push_back({{"distortion", t.distortion}, {"metrics", t.metrics}, {"results", modes}});
  }
  out["metric_combinations"] = combos;
  return out.dump(2) + "\n";
}

void write_single_layer_csv(std::ostream& out, const SingleLayerResult& result,
                            std::optional<double> baseline) {
  out << "layer,score,is_best,delta_vs_baseline\n";
  const auto old_precision = out.precision(10);
  for (std::size_t l = 0; l < result.per_layer.size(); ++l) {
    out << l << ',' << result.per_layer[l] << ',' << (l == result.best_layer ? 1 : 0) << ',';
    if (baseline) {
      out << *baseline - result.per_layer[l];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace simfuse
