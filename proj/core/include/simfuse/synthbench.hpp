#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simfuse/feature_store.hpp"
#include "simfuse/fusion_search.hpp"
#include "simfuse/patch_metric.hpp"

namespace simfuse {

/// Parameters of a synthetic paired gallery.
///
/// Generation (one SplitMix64 stream seeded with `seed`), for each
/// representation m in index order:
///   1. left row i, i = 0..N-1: D standard normals, divided by their norm;
///   2. right row i, i = 0..N-1: D standard normals g. If i is in
///      signal[m], the row is normalize(left_i + noise_sigma * g), otherwise
///      normalize(g).
/// Normalization happens in double; rows are stored as float.
struct SynthSpec {
  std::size_t n_pairs = 0;
  std::size_t n_reprs = 0;
  std::size_t dim = 0;
  /// Per representation, the pair indices whose right item copies the left.
  std::vector<std::vector<std::size_t>> signal;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Defaults to r00, r01, ... when empty.
  std::vector<std::string> repr_names;

  /// Two representations; the first covers pairs [0, N/2), the second the rest.
  static SynthSpec disjoint_halves(std::size_t n_pairs, std::size_t dim, std::uint64_t seed);
};

/// Throws std::invalid_argument for a degenerate spec.
void check_synth_spec(const SynthSpec& spec);

/// JSON form. `signal_assignment` holds one entry per representation:
/// "all", "none", an index array, or {"begin": b, "end": e}.
SynthSpec read_synth_spec(const std::filesystem::path& path);
void write_synth_spec(const SynthSpec& spec, const std::filesystem::path& path);

PairedGallery generate_gallery(const SynthSpec& spec);

/// Generates and writes the gallery under `dir`; returns the manifest path.
std::filesystem::path write_synth_gallery(const SynthSpec& spec, const std::filesystem::path& dir);

/// Largest gallery brute_force_recall accepts.
inline constexpr std::size_t kBruteForceMaxPairs = 256;

/// Test oracle: recall@1 of the fused subset recomputed from raw feature rows
/// with plain loops. Cosines are rounded to float as in the stored matrices;
/// normalization statistics use a two-pass mean/variance.
std::size_t brute_force_recall(const PairedGallery& gallery, SubsetMask subset, FusionMode mode);

/// 2AFC items where only `planted_layer` tells the closer patch apart.
///
/// Per item (one SplitMix64 stream): a uniform draw u decides p1_closer =
/// u < 0.5. Then per layer, ref/p0/p1 values are drawn in that order. On the
/// planted layer the closer patch is ref + 0.05 * g and the other patch is an
/// independent normal draw; on every other layer both patches are ref + g.
/// human_pref is 0.9 when p1 is closer and 0.1 otherwise. Stacks are
/// returned channel-normalized.
std::vector<Triple2AFC> generate_2afc_items(std::size_t n_items,
                                            std::span<const LayerShape> shapes,
                                            std::size_t planted_layer, std::uint64_t seed);

/// JSON spec accepted by `simfuse synth` when "kind" is "2afc".
struct Synth2AFCSpec {
  std::size_t n_items = 0;
  std::vector<LayerShape> layers;
  std::size_t planted_layer = 0;
  std::uint64_t seed = 0;
};

enum class SynthKind { gallery, two_afc };

/// Reads the optional "kind" field ("gallery" when absent, or "2afc").
SynthKind read_synth_kind(const std::filesystem::path& path);
/// JSON: {"kind": "2afc", "n_items", "layers": [{"h","w","c"}], "planted_layer", "seed"}.
Synth2AFCSpec read_synth_2afc_spec(const std::filesystem::path& path);

}  // namespace simfuse
