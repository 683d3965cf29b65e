#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace simfuse {

/// Rows must be unit L2 norm within this tolerance.
inline constexpr double kUnitNormTolerance = 1e-4;
/// Rows with a smaller norm make cosine similarity undefined.
inline constexpr double kZeroNormThreshold = 1e-8;

/// N feature vectors of one representation, row-major, with per-row item ids.
struct FeatureSet {
  std::string repr_name;
  std::size_t n_items = 0;
  std::size_t dim = 0;
  std::vector<float> rows;
  std::vector<std::string> item_ids;

  std::span<const float> row(std::size_t i) const {
    return {rows.data() + i * dim, dim};
  }

  bool operator==(const FeatureSet&) const = default;
};

/// Checks shape and item-id consistency and that every entry is finite.
/// Throws DataError on violation. Does not check norms.
void check_feature_set_shape(const FeatureSet& fs);

/// Result of the norm check performed at ingest.
struct ValidationReport {
  std::string repr_name;
  std::size_t n_items = 0;
  /// Rows whose norm deviates from 1 by more than kUnitNormTolerance.
  std::vector<std::size_t> off_norm_rows;
  double max_deviation = 0.0;

  bool ok() const noexcept { return off_norm_rows.empty(); }
};

/// Throws ZeroNormRowError for the first row with norm below
/// kZeroNormThreshold and DataError for non-finite entries.
ValidationReport validate_feature_set(const FeatureSet& fs);

/// Divides each row by its norm (computed in double). Same errors as
/// validate_feature_set.
FeatureSet renormalize_feature_set(const FeatureSet& fs);

/// Little-endian IEEE-754 binary32 encoding, independent of host byte order.
std::vector<std::byte> encode_f32_le(std::span<const float> values);
std::vector<float> decode_f32_le(std::span<const std::byte> bytes);

/// Paths of a written manifest/payload pair.
struct StoredFile {
  std::filesystem::path manifest;
  std::filesystem::path payload;
  std::uint64_t checksum = 0;
};

/// Writes `<manifest>` (JSON) and its payload `<manifest stem>.f32` next to
/// it. The manifest names the payload by its file name only.
StoredFile write_feature_set(const FeatureSet& fs, const std::filesystem::path& manifest);

/// Reads and verifies a manifest/payload pair. Throws DataError on checksum
/// mismatch, truncation or shape disagreement.
FeatureSet read_feature_set(const std::filesystem::path& manifest);

/// Left and right feature sets for M representations over N pairs; pair i
/// is (left[m].row(i), right[m].row(i)).
struct PairedGallery {
  std::size_t n_pairs = 0;
  std::vector<std::string> representations;
  std::vector<FeatureSet> left;
  std::vector<FeatureSet> right;

  std::size_t n_reprs() const noexcept { return representations.size(); }
};

/// Assembles a gallery: sorts representations lexicographically by name and
/// checks that N agrees everywhere, left/right dims agree per representation,
/// names are unique and item ids are ordered identically on each side.
PairedGallery make_gallery(std::vector<FeatureSet> left, std::vector<FeatureSet> right);

/// One row of a gallery manifest; file paths are relative to the manifest.
struct GalleryEntry {
  std::string name;
  std::string left_file;
  std::string right_file;
};

void write_gallery_manifest(const std::filesystem::path& manifest, std::size_t n_pairs,
                            const std::vector<GalleryEntry>& entries);

/// Loads every referenced feature set and assembles the gallery.
PairedGallery load_gallery(const std::filesystem::path& manifest);

/// Writes all 2M feature sets under `dir` as `<name>_left.json` and
/// `<name>_right.json` plus `gallery.json`. Returns the gallery manifest path.
std::filesystem::path write_gallery(const PairedGallery& gallery,
                                    const std::filesystem::path& dir);

}  // namespace simfuse
