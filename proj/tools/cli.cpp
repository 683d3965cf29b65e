#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "simfuse/analysis.hpp"
#include "simfuse/checksum.hpp"
#include "simfuse/error.hpp"
#include "simfuse/feature_store.hpp"
#include "simfuse/fusion_search.hpp"
#include "simfuse/parallel.hpp"
#include "simfuse/patch_metric.hpp"
#include "simfuse/report.hpp"
#include "simfuse/similarity.hpp"
#include "simfuse/synthbench.hpp"

namespace simfuse::cli {

namespace fs = std::filesystem;

namespace {

/// Bad flag combination or value; exits with kExitUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kCacheEnv = "SIMFUSE_CACHE_DIR";

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw DataError("cannot create '" + path.string() + "'");
  }
  f << text;
  if (!f) {
    throw DataError("write failed for '" + path.string() + "'");
  }
}

template <typename Fn>
void write_csv(const fs::path& path, Fn&& body) {
  std::ostringstream ss;
  body(ss);
  write_file(path, ss.str());
}

std::ifstream open_input(const fs::path& path, const char* what) {
  if (!fs::exists(path)) {
    throw DataError(std::string("missing ") + what + " '" + path.string() +
                    "' (run `simfuse search` first)");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  return in;
}

unsigned resolve_workers(unsigned requested) {
  return requested == 0 ? default_workers() : requested;
}

std::uint64_t n_choose_k(std::size_t n, std::size_t k) {
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
  }
  return r;
}

// ---------------------------------------------------------------- ingest

struct IngestConfig {
  std::vector<std::string> files;
  std::string gallery;
  bool renormalize = false;
  std::string out_dir;
};

int cmd_ingest(const IngestConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.files.empty() && cfg.gallery.empty()) {
    throw UsageError("ingest: give feature-set manifests or --gallery");
  }
  if (cfg.renormalize && cfg.out_dir.empty()) {
    throw UsageError("ingest: --renormalize needs --out");
  }

  std::vector<FeatureSet> sets;
  std::vector<std::string> labels;
  std::vector<std::string> dest_names;
  std::vector<GalleryEntry> entries;
  std::size_t n_pairs = 0;
  if (!cfg.gallery.empty()) {
    PairedGallery g = load_gallery(cfg.gallery);
    out << "gallery " << cfg.gallery << ": " << g.n_pairs << " pairs, " << g.n_reprs()
        << " representations\n";
    n_pairs = g.n_pairs;
    for (std::size_t m = 0; m < g.n_reprs(); ++m) {
      const auto& name = g.representations[m];
      entries.push_back({name, name + "_left.json", name + "_right.json"});
      labels.push_back(name + " (left)");
      dest_names.push_back(entries.back().left_file);
      sets.push_back(std::move(g.left[m]));
      labels.push_back(name + " (right)");
      dest_names.push_back(entries.back().right_file);
      sets.push_back(std::move(g.right[m]));
    }
  }
  for (const auto& f : cfg.files) {
    sets.push_back(read_feature_set(f));
    labels.push_back(f);
    dest_names.push_back(fs::path(f).filename().string());
  }

  if (cfg.renormalize) {
    fs::create_directories(cfg.out_dir);
  }
  std::size_t violations = 0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const ValidationReport rep = validate_feature_set(sets[s]);
    out << labels[s] << ": repr=" << rep.repr_name << " n_items=" << sets[s].n_items
        << " dim=" << sets[s].dim << " max_norm_deviation=" << rep.max_deviation
        << " off_norm_rows=" << rep.off_norm_rows.size();
    if (!rep.ok()) {
      out << " first_off_norm_row=" << rep.off_norm_rows.front();
    }
    out << '\n';
    if (cfg.renormalize) {
      const FeatureSet fixed = renormalize_feature_set(sets[s]);
      const StoredFile stored = write_feature_set(fixed, fs::path(cfg.out_dir) / dest_names[s]);
      out << "  wrote " << stored.manifest.string() << " (" << format_checksum(stored.checksum)
          << ")\n";
    } else {
      violations += rep.off_norm_rows.size();
    }
  }
  if (cfg.renormalize && !entries.empty()) {
    write_gallery_manifest(fs::path(cfg.out_dir) / "gallery.json", n_pairs, entries);
  }
  if (violations > 0) {
    err << "ingest: " << violations << " rows deviate from unit norm by more than "
        << kUnitNormTolerance << " (use --renormalize)\n";
    return kExitDataError;
  }
  out << "ok\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  if (read_synth_kind(spec_path) == SynthKind::two_afc) {
    const Synth2AFCSpec spec = read_synth_2afc_spec(spec_path);
    std::vector<Triple2AFC> items;
    try {
      items = generate_2afc_items(spec.n_items, spec.layers, spec.planted_layer, spec.seed);
    } catch (const std::invalid_argument& e) {
      throw DataError("'" + spec_path + "': " + e.what());
    }
    const fs::path manifest = dir / "items.json";
    write_2afc_set(items, manifest);
    out << "wrote " << manifest.string() << " (" << items.size() << " items, "
        << spec.layers.size() << " layers)\n";
    return kExitOk;
  }

  const SynthSpec spec = read_synth_spec(spec_path);
  const fs::path manifest = write_synth_gallery(spec, dir);
  out << "wrote " << manifest.string() << " (" << spec.n_pairs << " pairs, " << spec.n_reprs
      << " representations, dim " << spec.dim << ")\n";
  const PairedGallery g = load_gallery(manifest);
  for (std::size_t m = 0; m < g.n_reprs(); ++m) {
    for (const FeatureSet* fs : {&g.left[m], &g.right[m]}) {
      out << "  " << g.representations[m] << (fs == &g.left[m] ? " left  " : " right ")
          << format_checksum(fnv1a64(encode_f32_le(fs->rows))) << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- search

struct SearchConfig {
  std::string gallery;
  std::string mode = "both";
  std::size_t k = 1;
  std::string out_dir;
  unsigned workers = 1;
  std::string stats_scope = "full";
  bool cache = false;
  std::string cache_dir;
};

std::vector<SimilarityMatrix> build_stack(const PairedGallery& g, unsigned workers, bool cache,
                                          const std::string& cache_dir, std::ostream& out) {
  if (!cache) {
    return similarity_stack(g, workers);
  }
  std::string dir = cache_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv(kCacheEnv)) {
      dir = env;
    }
  }
  if (dir.empty()) {
    throw UsageError(std::string("search: --cache needs --cache-dir or $") + kCacheEnv);
  }
  fs::create_directories(dir);
  std::vector<SimilarityMatrix> stack;
  for (std::size_t m = 0; m < g.n_reprs(); ++m) {
    const auto lbytes = encode_f32_le(g.left[m].rows);
    const auto rbytes = encode_f32_le(g.right[m].rows);
    const std::uint64_t key = fnv1a64(rbytes, fnv1a64(lbytes)) ^ g.left[m].dim;
    const fs::path entry =
        fs::path(dir) / (g.representations[m] + "_" + format_checksum(key).substr(8) + ".json");
    if (fs::exists(entry)) {
      SimilarityMatrix cached = read_similarity_matrix(entry);
      if (cached.n == g.n_pairs && cached.name == g.representations[m]) {
        out << "cache hit " << entry.string() << '\n';
        stack.push_back(std::move(cached));
        continue;
      }
    }
    stack.push_back(cosine_similarity_matrix(g.left[m], g.right[m], workers));
    write_similarity_matrix(stack.back(), g.right[m].item_ids, entry);
  }
  return stack;
}

int cmd_search(const SearchConfig& cfg, std::ostream& out) {
  std::vector<FusionMode> modes;
  if (cfg.mode == "both") {
    modes = {FusionMode::raw, FusionMode::normalized};
  } else {
    modes = {parse_fusion_mode(cfg.mode)};
  }
  const StatsScope scope =
      cfg.stats_scope == "off-diagonal" ? StatsScope::off_diagonal : StatsScope::full;
  const unsigned workers = resolve_workers(cfg.workers);

  const PairedGallery g = load_gallery(cfg.gallery);
  if (g.n_reprs() > kMaxReprs) {
    throw DataError("gallery has " + std::to_string(g.n_reprs()) +
                    " representations; exhaustive search is limited to " +
                    std::to_string(kMaxReprs));
  }
  if (cfg.k < 1 || cfg.k > g.n_pairs) {
    throw UsageError("search: --k must be in [1, " + std::to_string(g.n_pairs) + "]");
  }
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);

  const auto stack = build_stack(g, workers, cfg.cache, cfg.cache_dir, out);
  const auto stats = stack_stats(stack, scope);
  const HitSets hits = hit_sets(stack, workers);
  write_hit_sets(dir / "hit_sets.json", hits, g.representations);
  write_csv(dir / "fig5a_singles.csv",
            [&](std::ostream& o) { write_singles_csv(o, hits, g.representations); });

  std::vector<ModeSummary> summaries;
  for (FusionMode mode : modes) {
    SearchOptions opts;
    opts.workers = workers;
    opts.k = cfg.k;
    const SearchResults r = search_all(stack, mode, stats, opts);
    const std::string tag(to_string(mode));
    write_csv(dir / ("search_" + tag + ".csv"),
              [&](std::ostream& o) { write_search_csv(o, r, g.representations); });
    ModeSummary s{mode, best_overall(r), best_per_size(r)};
    write_csv(dir / ("fig5b_best_per_size_" + tag + ".csv"),
              [&](std::ostream& o) { write_best_per_size_csv(o, s.curve, g.representations); });
    out << tag << ": " << r.entries.size() << " subsets, best recall@" << cfg.k << " = "
        << s.best.recall << " with " << mask_to_names(s.best.mask, g.representations) << '\n';
    summaries.push_back(std::move(s));
  }
  write_file(dir / "summary.json",
             search_summary_json(g.n_pairs, cfg.k, g.representations, stats, summaries));
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeConfig {
  std::string search_dir;
  std::string mode = "normalized";
  std::optional<std::size_t> size_filter;
  std::optional<std::size_t> q_max;
  std::string ablation_base;
  std::string ablation_scope = "all";
  std::string gallery;
  std::size_t top_n = 5;
  std::string out_dir;
  unsigned workers = 1;
};

int cmd_analyze(const AnalyzeConfig& cfg, std::ostream& out) {
  const FusionMode mode = parse_fusion_mode(cfg.mode);
  const fs::path sdir(cfg.search_dir);
  const fs::path hits_path = sdir / "hit_sets.json";
  const fs::path csv_path = sdir / ("search_" + std::string(to_string(mode)) + ".csv");
  open_input(hits_path, "hit sets");
  auto csv = open_input(csv_path, "search output");

  AnalysisBundle b;
  b.mode = mode;
  const HitSets hits = read_hit_sets(hits_path, b.representations);
  const auto& names = b.representations;
  const SearchResults r = read_search_csv(csv, mode, names);

  const std::size_t m = names.size();
  const std::size_t size_filter = cfg.size_filter.value_or(std::min<std::size_t>(4, m));
  const std::uint64_t available = n_choose_k(m, std::min(size_filter, m));
  const std::size_t q_max =
      cfg.q_max.value_or(static_cast<std::size_t>(std::min<std::uint64_t>(15, available)));
  b.participation = participation_ratio(r, size_filter, q_max);

  const SubsetMask base =
      cfg.ablation_base.empty() ? best_overall(r).mask : mask_from_names(cfg.ablation_base, names);
  b.ablation = ablate(r, base,
                      cfg.ablation_scope == "same-size" ? AblationScope::same_size
                                                        : AblationScope::all_sizes);
  b.oracle = oracle_recall(hits);
  for (std::size_t k = 0; k < m; ++k) {
    b.single_recalls.push_back(hits.count(k));
  }
  b.exclusive = exclusive_contributions(hits);

  if (!cfg.gallery.empty()) {
    const PairedGallery g = load_gallery(cfg.gallery);
    if (g.representations != names) {
      throw DataError("gallery representations do not match the search output");
    }
    const unsigned workers = resolve_workers(cfg.workers);
    const auto stack = similarity_stack(g, workers);
    const FusedMatrix fused = mode == FusionMode::raw
                                  ? combine_raw(stack, base)
                                  : combine_normalized(stack, stack_stats(stack), base);
    b.failure_subset = base;
    b.failures = failure_cases(fused, std::min(cfg.top_n, g.n_pairs));
  }

  const fs::path dir(cfg.out_dir.empty() ? cfg.search_dir : cfg.out_dir);
  fs::create_directories(dir);
  write_file(dir / "analysis.json", analysis_bundle_json(b));
  write_csv(dir / "fig6a_participation.csv",
            [&](std::ostream& o) { write_participation_csv(o, *b.participation, names); });
  write_csv(dir / "fig6c_exclusive.csv",
            [&](std::ostream& o) { write_exclusive_csv(o, b.exclusive, hits, names); });

  out << "oracle recall " << b.oracle << ", exclusive total " << b.exclusive.total_exclusive
      << ", ablation base " << mask_to_names(base, names) << " (" << b.ablation.base_recall
      << ")\n";
  for (const auto& row : b.ablation.rows) {
    out << "  without " << names[row.removed] << ": " << row.best_recall << " (delta "
        << row.delta << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bapps

struct BappsConfig {
  std::string items;
  std::string weights;
  std::string distortion;
  std::optional<double> baseline;
  std::vector<std::string> tables;
  std::string out_dir;
  unsigned workers = 1;
};

int cmd_bapps(const BappsConfig& cfg, std::ostream& out) {
  if (cfg.items.empty() && cfg.tables.empty()) {
    throw UsageError("bapps: give --items and/or --table");
  }
  const unsigned workers = resolve_workers(cfg.workers);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  BappsReport rep;
  rep.baseline = cfg.baseline;

  if (!cfg.items.empty()) {
    std::vector<Triple2AFC> items = read_2afc_set(cfg.items);
    for (auto& t : items) {
      t.ref = channel_normalize(t.ref);
      t.p0 = channel_normalize(t.p0);
      t.p1 = channel_normalize(t.p1);
    }
    const auto shapes = items.front().ref.shapes();
    const LayerWeights w =
        cfg.weights.empty() ? LayerWeights::uniform(shapes) : read_layer_weights(cfg.weights);
    const std::string name =
        cfg.distortion.empty() ? fs::path(cfg.items).stem().string() : cfg.distortion;
    try {
      rep.scores.push_back(score_2afc(items, w, name, workers));
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("bapps: ") + e.what());
    }
    rep.single_layer = best_single_layer(items, workers);
    write_csv(dir / "single_layer.csv", [&](std::ostream& o) {
      write_single_layer_csv(o, *rep.single_layer, cfg.baseline);
    });
    out << name << ": score " << rep.scores.back().score << " over " << items.size()
        << " items; best single layer L_s=" << rep.single_layer->best_layer << " score "
        << rep.single_layer->best_score;
    if (cfg.baseline) {
      out << " delta " << *cfg.baseline - rep.single_layer->best_score;
    }
    out << '\n';
  }

  for (const auto& path : cfg.tables) {
    std::ifstream in(path);
    if (!in) {
      throw DataError("cannot open distance table '" + path + "'");
    }
    const DistanceTable t = read_distance_table_csv(in);
    TableCombinations combos{fs::path(path).stem().string(), t.metrics,
                             search_metric_combinations(t, false),
                             search_metric_combinations(t, true)};
    for (std::size_t m = 0; m < t.metrics.size(); ++m) {
      rep.scores.push_back({combos.distortion + ":" + t.metrics[m],
                            score_from_distances(t.d0[m], t.d1[m], t.human_pref),
                            t.item_ids.size()});
    }
    out << combos.distortion << ": best summed " << mask_to_names(combos.summed.best.mask, t.metrics)
        << " = " << combos.summed.best.score << ", best z-scored "
        << mask_to_names(combos.zscored.best.mask, t.metrics) << " = "
        << combos.zscored.best.score << '\n';
    rep.tables.push_back(std::move(combos));
  }

  write_file(dir / "bapps.json", bapps_report_json(rep));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-representation similarity fusion and 2AFC scoring"};
  app.name(args.empty() ? "simfuse" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  IngestConfig ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate feature-set files");
  ingest_cmd->add_option("files", ingest.files, "Feature-set manifests");
  ingest_cmd->add_option("--gallery", ingest.gallery, "Gallery manifest to validate");
  ingest_cmd->add_flag("--renormalize", ingest.renormalize, "Write unit-norm copies");
  ingest_cmd->add_option("--out", ingest.out_dir, "Directory for renormalized files");

  std::string synth_spec;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic gallery or 2AFC set");
  synth_cmd->add_option("spec", synth_spec, "Synthetic spec (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  SearchConfig search;
  auto* search_cmd = app.add_subcommand("search", "Exhaustive subset fusion search");
  search_cmd->add_option("--gallery", search.gallery, "Gallery manifest")->required();
  search_cmd->add_option("--mode", search.mode, "raw | normalized | both")
      ->check(CLI::IsMember({"raw", "normalized", "both"}));
  search_cmd->add_option("--k", search.k, "Recall cutoff")->check(CLI::PositiveNumber);
  search_cmd->add_option("--out", search.out_dir, "Output directory")->required();
  search_cmd->add_option("--workers", search.workers, "Worker threads (0 = all cores)");
  search_cmd->add_option("--stats-scope", search.stats_scope, "full | off-diagonal")
      ->check(CLI::IsMember({"full", "off-diagonal"}));
  search_cmd->add_flag("--cache", search.cache, "Cache similarity matrices");
  search_cmd->add_option("--cache-dir", search.cache_dir,
                         std::string("Cache directory (default $") + kCacheEnv + ")");

  AnalyzeConfig analyze;
  std::size_t size_filter = 4;
  std::size_t q_max = 15;
  auto* analyze_cmd = app.add_subcommand("analyze", "Participation, ablation, oracle analyses");
  analyze_cmd->add_option("--search-dir", analyze.search_dir, "Output of `search`")->required();
  analyze_cmd->add_option("--mode", analyze.mode, "raw | normalized")
      ->check(CLI::IsMember({"raw", "normalized"}));
  auto* size_opt = analyze_cmd->add_option("--size-filter", size_filter, "Subset size (default 4)");
  auto* q_opt = analyze_cmd->add_option("--q-max", q_max, "Leading ranks (default 15)");
  analyze_cmd->add_option("--ablation-base", analyze.ablation_base,
                          "Base subset as name+name+... (default: global best)");
  analyze_cmd->add_option("--ablation-scope", analyze.ablation_scope, "all | same-size")
      ->check(CLI::IsMember({"all", "same-size"}));
  analyze_cmd->add_option("--gallery", analyze.gallery, "Gallery manifest for failure cases");
  analyze_cmd->add_option("--top-n", analyze.top_n, "Retrievals listed per failure")
      ->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--out", analyze.out_dir, "Output directory (default: search dir)");
  analyze_cmd->add_option("--workers", analyze.workers, "Worker threads (0 = all cores)");

  BappsConfig bapps;
  double baseline = 0.0;
  auto* bapps_cmd = app.add_subcommand("bapps", "2AFC scoring and single-layer selection");
  bapps_cmd->add_option("--items", bapps.items, "2AFC activation set manifest");
  bapps_cmd->add_option("--weights", bapps.weights, "Per-channel layer weights (JSON)");
  bapps_cmd->add_option("--distortion", bapps.distortion, "Name for the item set");
  auto* baseline_opt =
      bapps_cmd->add_option("--baseline", baseline, "Calibrated score to compare against");
  bapps_cmd->add_option("--table", bapps.tables, "Distance-table CSV (repeatable)");
  bapps_cmd->add_option("--out", bapps.out_dir, "Output directory")->required();
  bapps_cmd->add_option("--workers", bapps.workers, "Worker threads (0 = all cores)");

  std::vector<std::string> owned(args);
  if (owned.empty()) {
    owned.emplace_back("simfuse");
  }
  std::vector<char*> argv;
  for (auto& a : owned) {
    argv.push_back(a.data());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) {
      return cmd_ingest(ingest, out, err);
    }
    if (*synth_cmd) {
      return cmd_synth(synth_spec, synth_out, out);
    }
    if (*search_cmd) {
      return cmd_search(search, out);
    }
    if (*analyze_cmd) {
      if (size_opt->count() > 0) {
        analyze.size_filter = size_filter;
      }
      if (q_opt->count() > 0) {
        analyze.q_max = q_max;
      }
      return cmd_analyze(analyze, out);
    }
    if (*bapps_cmd) {
      if (baseline_opt->count() > 0) {
        bapps.baseline = baseline;
      }
      return cmd_bapps(bapps, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace simfuse::cli
