#include "simfuse/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "io_util.hpp"
#include "simfuse/checksum.hpp"
#include "simfuse/error.hpp"

namespace simfuse {

namespace fs = std::filesystem;
using detail::json;

namespace {

double row_norm(std::span<const float> row) {
  double sq = 0.0;
  for (float v : row) {
    sq += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(sq);
}

void check_finite(const FeatureSet& fs) {
  for (std::size_t k = 0; k < fs.rows.size(); ++k) {
    if (!std::isfinite(fs.rows[k])) {
      throw DataError("representation '" + fs.repr_name + "': non-finite value at row " +
                      std::to_string(k / fs.dim) + ", column " + std::to_string(k % fs.dim));
    }
  }
}

}  // namespace

void check_feature_set_shape(const FeatureSet& fs) {
  if (fs.repr_name.empty()) {
    throw DataError("feature set has an empty repr_name");
  }
  if (fs.n_items == 0 || fs.dim == 0) {
    throw DataError("representation '" + fs.repr_name + "': n_items and dim must be >= 1");
  }
  if (fs.rows.size() != fs.n_items * fs.dim) {
    throw DataError("representation '" + fs.repr_name + "': expected " +
                    std::to_string(fs.n_items * fs.dim) + " values, got " +
                    std::to_string(fs.rows.size()));
  }
  if (fs.item_ids.size() != fs.n_items) {
    throw DataError("representation '" + fs.repr_name + "': " +
                    std::to_string(fs.item_ids.size()) + " item ids for " +
                    std::to_string(fs.n_items) + " items");
  }
  std::set<std::string_view> seen;
  for (const auto& id : fs.item_ids) {
    if (!seen.insert(id).second) {
      throw DataError("representation '" + fs.repr_name + "': duplicate item id '" + id + "'");
    }
  }
  check_finite(fs);
}

ValidationReport validate_feature_set(const FeatureSet& fs) {
  check_feature_set_shape(fs);
  ValidationReport report{fs.repr_name, fs.n_items, {}, 0.0};
  for (std::size_t i = 0; i < fs.n_items; ++i) {
    const double norm = row_norm(fs.row(i));
    if (norm < kZeroNormThreshold) {
      throw ZeroNormRowError(fs.repr_name, i);
    }
    const double dev = std::abs(norm - 1.0);
    report.max_deviation = std::max(report.max_deviation, dev);
    if (dev > kUnitNormTolerance) {
      report.off_norm_rows.push_back(i);
    }
  }
  return report;
}

FeatureSet renormalize_feature_set(const FeatureSet& fs) {
  check_feature_set_shape(fs);
  FeatureSet out = fs;
  for (std::size_t i = 0; i < fs.n_items; ++i) {
    const auto src = fs.row(i);
    const double norm = row_norm(src);
    if (norm < kZeroNormThreshold) {
      throw ZeroNormRowError(fs.repr_name, i);
    }
    float* dst = out.rows.data() + i * fs.dim;
    for (std::size_t d = 0; d < fs.dim; ++d) {
      dst[d] = static_cast<float>(static_cast<double>(src[d]) / norm);
    }
  }
  return out;
}

std::vector<std::byte> encode_f32_le(std::span<const float> values) {
  std::vector<std::byte> out(values.size() * 4);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(values[k]);
    for (std::size_t b = 0; b < 4; ++b) {
      out[4 * k + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xffU);
    }
  }
  return out;
}

std::vector<float> decode_f32_le(std::span<const std::byte> bytes) {
  if (bytes.size() % 4 != 0) {
    throw DataError("payload size " + std::to_string(bytes.size()) +
                    " is not a multiple of 4 bytes");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(bytes[4 * k + b]) << (8 * b);
    }
    out[k] = std::bit_cast<float>(bits);
  }
  return out;
}

StoredFile write_feature_set(const FeatureSet& fs, const fs::path& manifest) {
  check_feature_set_shape(fs);
  const auto payload = encode_f32_le(fs.rows);
  const std::uint64_t checksum = fnv1a64(payload);

  fs::path payload_path = manifest;
  payload_path.replace_extension(".f32");
  detail::write_bytes(payload_path, payload);

  json doc;
  doc["repr_name"] = fs.repr_name;
  doc["n_items"] = fs.n_items;
  doc["dim"] = fs.dim;
  doc["item_ids"] = fs.item_ids;
  doc["checksum"] = format_checksum(checksum);
  doc["payload_file"] = payload_path.filename().string();
  detail::write_json_file(manifest, doc);
  return {manifest, payload_path, checksum};
}

FeatureSet read_feature_set(const fs::path& manifest) {
  const json doc = detail::read_json_file(manifest);
  FeatureSet fs;
  fs.repr_name = detail::field<std::string>(doc, "repr_name", manifest);
  fs.n_items = detail::field<std::size_t>(doc, "n_items", manifest);
  fs.dim = detail::field<std::size_t>(doc, "dim", manifest);
  fs.item_ids = detail::field<std::vector<std::string>>(doc, "item_ids", manifest);
  const auto checksum = parse_checksum(detail::field<std::string>(doc, "checksum", manifest));
  const auto payload_name = detail::field<std::string>(doc, "payload_file", manifest);

  const fs::path payload_path = manifest.parent_path() / payload_name;
  const auto bytes = detail::read_bytes(payload_path);
  const std::size_t expected = fs.n_items * fs.dim * 4;
  if (bytes.size() != expected) {
    throw DataError("'" + payload_path.string() + "': payload holds " +
                    std::to_string(bytes.size()) + " bytes but manifest declares " +
                    std::to_string(fs.n_items) + "x" + std::to_string(fs.dim) + " (" +
                    std::to_string(expected) + " bytes)");
  }
  if (fnv1a64(bytes) != checksum) {
    throw DataError("'" + payload_path.string() + "': checksum mismatch");
  }
  fs.rows = decode_f32_le(bytes);
  check_feature_set_shape(fs);
  return fs;
}

PairedGallery make_gallery(std::vector<FeatureSet> left, std::vector<FeatureSet> right) {
  if (left.empty() || left.size() != right.size()) {
    throw DataError("gallery needs the same non-zero number of left and right feature sets");
  }
  std::map<std::string, std::pair<FeatureSet, FeatureSet>> by_name;
  for (std::size_t m = 0; m < left.size(); ++m) {
    if (left[m].repr_name != right[m].repr_name) {
      throw DataError("left/right representation names differ: '" + left[m].repr_name +
                      "' vs '" + right[m].repr_name + "'");
    }
    auto name = left[m].repr_name;
    if (!by_name.emplace(name, std::pair{std::move(left[m]), std::move(right[m])}).second) {
      throw DataError("duplicate representation '" + name + "'");
    }
  }

  PairedGallery g;
  g.n_pairs = by_name.begin()->second.first.n_items;
  for (auto& [name, sides] : by_name) {
    auto& [l, r] = sides;
    check_feature_set_shape(l);
    check_feature_set_shape(r);
    if (l.n_items != g.n_pairs || r.n_items != g.n_pairs) {
      throw DataError("representation '" + name + "': item count mismatch (left " +
                      std::to_string(l.n_items) + ", right " + std::to_string(r.n_items) +
                      ", gallery " + std::to_string(g.n_pairs) + ")");
    }
    if (l.dim != r.dim) {
      throw DataError("representation '" + name + "': left dim " + std::to_string(l.dim) +
                      " != right dim " + std::to_string(r.dim));
    }
    if (!g.left.empty() && (l.item_ids != g.left.front().item_ids ||
                            r.item_ids != g.right.front().item_ids)) {
      throw DataError("representation '" + name +
                      "': item ids are not ordered identically to the other representations");
    }
    g.representations.push_back(name);
    g.left.push_back(std::move(l));
    g.right.push_back(std::move(r));
  }
  return g;
}

void write_gallery_manifest(const fs::path& manifest, std::size_t n_pairs,
                            const std::vector<GalleryEntry>& entries) {
  json reprs = json::array();
  for (const auto& e : entries) {
    reprs.push_back({{"name", e.name}, {"left_file", e.left_file}, {"right_file", e.right_file}});
  }
  detail::write_json_file(manifest, json{{"n_pairs", n_pairs}, {"representations", reprs}});
}

PairedGallery load_gallery(const fs::path& manifest) {
  const json doc = detail::read_json_file(manifest);
  const auto n_pairs = detail::field<std::size_t>(doc, "n_pairs", manifest);
  const auto reprs = detail::field<json>(doc, "representations", manifest);
  if (!reprs.is_array() || reprs.empty()) {
    throw DataError("'" + manifest.string() + "': 'representations' must be a non-empty array");
  }

  const fs::path base = manifest.parent_path();
  std::vector<FeatureSet> left;
  std::vector<FeatureSet> right;
  std::set<std::string> names;
  for (const auto& entry : reprs) {
    const auto name = detail::field<std::string>(entry, "name", manifest);
    if (!names.insert(name).second) {
      throw DataError("'" + manifest.string() + "': duplicate representation '" + name + "'");
    }
    const fs::path lpath = base / detail::field<std::string>(entry, "left_file", manifest);
    const fs::path rpath = base / detail::field<std::string>(entry, "right_file", manifest);
    for (const auto& p : {lpath, rpath}) {
      if (!fs::exists(p)) {
        throw DataError("'" + manifest.string() + "': missing file '" + p.string() + "'");
      }
    }
    left.push_back(read_feature_set(lpath));
    right.push_back(read_feature_set(rpath));
    if (left.back().repr_name != name || right.back().repr_name != name) {
      throw DataError("'" + manifest.string() + "': files for '" + name +
                      "' declare a different repr_name");
    }
  }

  PairedGallery g = make_gallery(std::move(left), std::move(right));
  if (g.n_pairs != n_pairs) {
    throw DataError("'" + manifest.string() + "': n_pairs " + std::to_string(n_pairs) +
                    " disagrees with feature files (" + std::to_string(g.n_pairs) + ")");
  }
  return g;
}

fs::path write_gallery(const PairedGallery& gallery, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<GalleryEntry> entries;
  for (std::size_t m = 0; m < gallery.n_reprs(); ++m) {
    const auto& name = gallery.representations[m];
    const std::string lname = name + "_left.json";
    const std::string rname = name + "_right.json";
    write_feature_set(gallery.left[m], dir / lname);
    write_feature_set(gallery.right[m], dir / rname);
    entries.push_back({name, lname, rname});
  }
  const fs::path manifest = dir / "gallery.json";
  write_gallery_manifest(manifest, gallery.n_pairs, entries);
  return manifest;
}

}  // namespace simfuse
