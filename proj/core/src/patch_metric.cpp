#include "simfuse/patch_metric.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "io_util.hpp"
#include "simfuse/checksum.hpp"
#include "simfuse/error.hpp"
#include "simfuse/feature_store.hpp"
#include "simfuse/parallel.hpp"

namespace simfuse {

namespace fs = std::filesystem;
using detail::json;

std::vector<LayerShape> ActivationStack::shapes() const {
  std::vector<LayerShape> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back(l.shape);
  }
  return out;
}

void check_activation_stack(const ActivationStack& s) {
  if (s.layers.empty()) {
    throw DataError("activation stack has no layers");
  }
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const auto& layer = s.layers[l];
    if (layer.shape.h == 0 || layer.shape.w == 0 || layer.shape.c == 0) {
      throw DataError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (layer.values.size() != layer.shape.size()) {
      throw DataError("layer " + std::to_string(l) + ": expected " +
                      std::to_string(layer.shape.size()) + " values, got " +
                      std::to_string(layer.values.size()));
    }
    for (float v : layer.values) {
      if (!std::isfinite(v)) {
        throw DataError("layer " + std::to_string(l) + " has a non-finite activation");
      }
    }
  }
}

LayerWeights LayerWeights::uniform(std::span<const LayerShape> shapes) {
  LayerWeights w;
  for (const auto& s : shapes) {
    w.per_layer.emplace_back(s.c, 1.0);
  }
  return w;
}

ActivationStack channel_normalize(const ActivationStack& s) {
  ActivationStack out = s;
  for (auto& layer : out.layers) {
    const std::size_t c = layer.shape.c;
    for (std::size_t pos = 0; pos < layer.shape.h * layer.shape.w; ++pos) {
      float* v = layer.values.data() + pos * c;
      double sq = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        sq += static_cast<double>(v[k]) * static_cast<double>(v[k]);
      }
      const double norm = std::sqrt(sq);
      for (std::size_t k = 0; k < c; ++k) {
        v[k] = norm < kMinChannelNorm ? 0.0F : static_cast<float>(static_cast<double>(v[k]) / norm);
      }
    }
  }
  return out;
}

double weighted_layer_distance(const ActivationStack& x, const ActivationStack& x0,
                               const LayerWeights& w) {
  if (x.layers.size() != x0.layers.size() || x.layers.size() != w.per_layer.size()) {
    throw std::invalid_argument("layer count mismatch between stacks and weights");
  }
  double d = 0.0;
  for (std::size_t l = 0; l < x.layers.size(); ++l) {
    const auto& a = x.layers[l];
    const auto& b = x0.layers[l];
    const auto& omega = w.per_layer[l];
    if (a.shape != b.shape || a.values.size() != a.shape.size() ||
        b.values.size() != b.shape.size()) {
      throw std::invalid_argument("layer " + std::to_string(l) + " shape mismatch");
    }
    if (omega.size() != a.shape.c) {
      throw std::invalid_argument("layer " + std::to_string(l) + ": " +
                                  std::to_string(omega.size()) + " weights for " +
                                  std::to_string(a.shape.c) + " channels");
    }
    const std::size_t c = a.shape.c;
    const std::size_t positions = a.shape.h * a.shape.w;
    double layer_sum = 0.0;
    for (std::size_t pos = 0; pos < positions; ++pos) {
      const float* va = a.values.data() + pos * c;
      const float* vb = b.values.data() + pos * c;
      for (std::size_t k = 0; k < c; ++k) {
        const double diff = omega[k] * (static_cast<double>(va[k]) - static_cast<double>(vb[k]));
        layer_sum += diff * diff;
      }
    }
    d += layer_sum / static_cast<double>(positions);
  }
  return d;
}

LayerWeights single_layer_selector(const LayerWeights& w, std::size_t layer) {
  if (layer >= w.per_layer.size()) {
    throw std::out_of_range("layer " + std::to_string(layer) + " out of range for " +
                            std::to_string(w.per_layer.size()) + " layers");
  }
  LayerWeights out;
  for (std::size_t l = 0; l < w.per_layer.size(); ++l) {
    out.per_layer.emplace_back(w.per_layer[l].size(), l == layer ? 1.0 : 0.0);
  }
  return out;
}

Choice judge_distances(double d0, double d1) noexcept {
  if (std::abs(d0 - d1) <= kTieTolerance) {
    return Choice::tie;
  }
  return d0 < d1 ? Choice::p0 : Choice::p1;
}

Choice judge_2afc(const Triple2AFC& t, const LayerWeights& w) {
  const double d0 = weighted_layer_distance(t.p0, t.ref, w);
  const double d1 = weighted_layer_distance(t.p1, t.ref, w);
  return judge_distances(d0, d1);
}

double agreement_credit(Choice choice, double human_pref) noexcept {
  switch (choice) {
    case Choice::p1:
      return human_pref;
    case Choice::p0:
      return 1.0 - human_pref;
    case Choice::tie:
      break;
  }
  return 0.5;
}

namespace {

void check_pref(double p, std::size_t item) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DataError("item " + std::to_string(item) + ": human_pref outside [0, 1]");
  }
}

}  // namespace

TwoAFCScore score_2afc(std::span<const Triple2AFC> items, const LayerWeights& w,
                       const std::string& distortion, unsigned workers) {
  if (items.empty()) {
    throw std::invalid_argument("2AFC scoring needs at least one item");
  }
  std::vector<double> credit(items.size());
  parallel_for(items.size(), workers, [&](unsigned, std::size_t i) {
    check_pref(items[i].human_pref, i);
    credit[i] = agreement_credit(judge_2afc(items[i], w), items[i].human_pref);
  });
  double sum = 0.0;
  for (double c : credit) {
    sum += c;
  }
  return {distortion, sum / static_cast<double>(items.size()), items.size()};
}

double score_from_distances(std::span<const double> d0, std::span<const double> d1,
                            std::span<const double> human_pref) {
  if (d0.empty() || d0.size() != d1.size() || d0.size() != human_pref.size()) {
    throw std::invalid_argument("distance/preference vectors must be non-empty and aligned");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < d0.size(); ++i) {
    check_pref(human_pref[i], i);
    sum += agreement_credit(judge_distances(d0[i], d1[i]), human_pref[i]);
  }
  return sum / static_cast<double>(d0.size());
}

SingleLayerResult best_single_layer(std::span<const Triple2AFC> items, unsigned workers) {
  if (items.empty()) {
    throw std::invalid_argument("2AFC scoring needs at least one item");
  }
  const auto shapes = items.front().ref.shapes();
  if (shapes.empty()) {
    throw std::invalid_argument("items have no layers");
  }
  const LayerWeights base = LayerWeights::uniform(shapes);
  SingleLayerResult out;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const double s = score_2afc(items, single_layer_selector(base, l), {}, workers).score;
    out.per_layer.push_back(s);
    if (l == 0 || s > out.best_score) {
      out.best_score = s;
      out.best_layer = l;
    }
  }
  return out;
}

DistanceTable read_distance_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "item_id,metric,d0,d1,human_pref") {
    throw DataError("distance table: expected header 'item_id,metric,d0,d1,human_pref'");
  }
  struct Row {
    double d0;
    double d1;
  };
  std::map<std::string, std::map<std::string, Row>> by_metric;
  std::vector<std::string> item_order;
  std::map<std::string, double> prefs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream ss(line);
    std::string f[5];
    for (int k = 0; k < 5; ++k) {
      if (!std::getline(ss, f[k], k < 4 ? ',' : '\n')) {
        throw DataError("distance table line " + std::to_string(line_no) + ": expected 5 fields");
      }
    }
    double d0 = 0.0;
    double d1 = 0.0;
    double pref = 0.0;
    try {
      d0 = std::stod(f[2]);
      d1 = std::stod(f[3]);
      pref = std::stod(f[4]);
    } catch (const std::logic_error&) {
      throw DataError("distance table line " + std::to_string(line_no) + ": bad number");
    }
    if (!std::isfinite(d0) || !std::isfinite(d1) || !(pref >= 0.0 && pref <= 1.0)) {
      throw DataError("distance table line " + std::to_string(line_no) +
                      ": distances must be finite and human_pref in [0, 1]");
    }
    const auto [it, fresh] = prefs.emplace(f[0], pref);
    if (fresh) {
      item_order.push_back(f[0]);
    } else if (std::abs(it->second - pref) > 1e-12) {
      throw DataError("distance table line " + std::to_string(line_no) + ": item '" + f[0] +
                      "' has inconsistent human_pref across metrics");
    }
    if (!by_metric[f[1]].emplace(f[0], Row{d0, d1}).second) {
      throw DataError("distance table line " + std::to_string(line_no) + ": duplicate (" +
                      f[0] + ", " + f[1] + ")");
    }
  }
  if (by_metric.empty()) {
    throw DataError("distance table is empty");
  }

  DistanceTable t;
  t.item_ids = item_order;
  for (const auto& id : item_order) {
    t.human_pref.push_back(prefs.at(id));
  }
  for (const auto& [metric, rows] : by_metric) {
    if (rows.size() != item_order.size()) {
      throw DataError("distance table: metric '" + metric + "' covers " +
                      std::to_string(rows.size()) + " of " + std::to_string(item_order.size()) +
                      " items");
    }
    t.metrics.push_back(metric);
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& id : item_order) {
      const Row r = rows.at(id);
      a.push_back(r.d0);
      b.push_back(r.d1);
    }
    t.d0.push_back(std::move(a));
    t.d1.push_back(std::move(b));
  }
  return t;
}

void write_distance_table_csv(std::ostream& out, const DistanceTable& table) {
  out << "item_id,metric,d0,d1,human_pref\n";
  out.precision(17);
  for (std::size_t m = 0; m < table.metrics.size(); ++m) {
    for (std::size_t i = 0; i < table.item_ids.size(); ++i) {
      out << table.item_ids[i] << ',' << table.metrics[m] << ',' << table.d0[m][i] << ','
          << table.d1[m][i] << ',' << table.human_pref[i] << '\n';
    }
  }
}

MetricComboResult search_metric_combinations(const DistanceTable& table, bool normalize) {
  const std::size_t n_metrics = table.metrics.size();
  const std::size_t n_items = table.item_ids.size();
  if (n_metrics == 0 || n_metrics > kMaxReprs) {
    throw std::invalid_argument("metric count must be in [1, " + std::to_string(kMaxReprs) + "]");
  }
  if (table.d0.size() != n_metrics || table.d1.size() != n_metrics ||
      table.human_pref.size() != n_items) {
    throw std::invalid_argument("distance table is misaligned");
  }
  for (std::size_t m = 0; m < n_metrics; ++m) {
    if (table.d0[m].size() != n_items || table.d1[m].size() != n_items) {
      throw std::invalid_argument("distance table is misaligned for metric '" +
                                  table.metrics[m] + "'");
    }
  }

  // Per-metric affine map applied before summation.
  std::vector<double> offset(n_metrics, 0.0);
  std::vector<double> scale(n_metrics, 1.0);
  if (normalize) {
    for (std::size_t m = 0; m < n_metrics; ++m) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n_items; ++i) {
        sum += table.d0[m][i] + table.d1[m][i];
      }
      const double count = 2.0 * static_cast<double>(n_items);
      const double mean = sum / count;
      double sq = 0.0;
      for (std::size_t i = 0; i < n_items; ++i) {
        sq += (table.d0[m][i] - mean) * (table.d0[m][i] - mean);
        sq += (table.d1[m][i] - mean) * (table.d1[m][i] - mean);
      }
      const double sd = std::sqrt(sq / count);
      offset[m] = mean;
      scale[m] = sd < 1e-9 ? 0.0 : 1.0 / sd;
    }
  }

  MetricComboResult out;
  out.normalized = normalize;
  const std::uint32_t total = (std::uint32_t{1} << n_metrics) - 1;
  std::vector<double> a(n_items);
  std::vector<double> b(n_items);
  for (std::uint32_t bits = 1; bits <= total; ++bits) {
    const SubsetMask mask(bits);
    std::fill(a.begin(), a.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t m : mask.members()) {
      for (std::size_t i = 0; i < n_items; ++i) {
        if (normalize) {
          a[i] += (table.d0[m][i] - offset[m]) * scale[m];
          b[i] += (table.d1[m][i] - offset[m]) * scale[m];
        } else {
          a[i] += table.d0[m][i];
          b[i] += table.d1[m][i];
        }
      }
    }
    const MetricComboEntry e{mask, score_from_distances(a, b, table.human_pref)};
    out.entries.push_back(e);
    if (bits == 1 || e.score > out.best.score) {
      out.best = e;
    }
  }
  return out;
}

namespace {

json shapes_to_json(std::span<const LayerShape> shapes) {
  json arr = json::array();
  for (const auto& s : shapes) {
    arr.push_back({{"h", s.h}, {"w", s.w}, {"c", s.c}});
  }
  return arr;
}

std::vector<LayerShape> shapes_from_json(const json& doc, const fs::path& origin) {
  const auto arr = detail::field<json>(doc, "layers", origin);
  if (!arr.is_array() || arr.empty()) {
    throw DataError("'" + origin.string() + "': 'layers' must be a non-empty array");
  }
  std::vector<LayerShape> out;
  for (const auto& l : arr) {
    LayerShape s{detail::field<std::size_t>(l, "h", origin),
                 detail::field<std::size_t>(l, "w", origin),
                 detail::field<std::size_t>(l, "c", origin)};
    if (s.h == 0 || s.w == 0 || s.c == 0) {
      throw DataError("'" + origin.string() + "': layer with a zero dimension");
    }
    out.push_back(s);
  }
  return out;
}

void append_stack(std::vector<float>& flat, const ActivationStack& s,
                  std::span<const LayerShape> shapes) {
  if (s.shapes() != std::vector<LayerShape>(shapes.begin(), shapes.end())) {
    throw DataError("activation stack layout differs from the set's layer shapes");
  }
  check_activation_stack(s);
  for (const auto& l : s.layers) {
    flat.insert(flat.end(), l.values.begin(), l.values.end());
  }
}

ActivationStack take_stack(std::span<const float>& flat, std::span<const LayerShape> shapes) {
  ActivationStack s;
  for (const auto& shape : shapes) {
    s.layers.push_back({shape, {flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(shape.size())}});
    flat = flat.subspan(shape.size());
  }
  return s;
}

std::uint64_t write_payload(const fs::path& manifest, std::span<const float> flat,
                            fs::path& payload_path) {
  payload_path = manifest;
  payload_path.replace_extension(".f32");
  const auto bytes = encode_f32_le(flat);
  detail::write_bytes(payload_path, bytes);
  return fnv1a64(bytes);
}

std::vector<float> read_payload(const fs::path& manifest, const json& doc,
                                std::size_t expected_floats) {
  const fs::path payload_path =
      manifest.parent_path() / detail::field<std::string>(doc, "payload_file", manifest);
  const auto checksum = parse_checksum(detail::field<std::string>(doc, "checksum", manifest));
  const auto bytes = detail::read_bytes(payload_path);
  if (bytes.size() != expected_floats * 4) {
    throw DataError("'" + payload_path.string() + "': payload holds " +
                    std::to_string(bytes.size()) + " bytes, manifest implies " +
                    std::to_string(expected_floats * 4));
  }
  if (fnv1a64(bytes) != checksum) {
    throw DataError("'" + payload_path.string() + "': checksum mismatch");
  }
  return decode_f32_le(bytes);
}

std::size_t floats_per_stack(std::span<const LayerShape> shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) {
    n += s.size();
  }
  return n;
}

}  // namespace

void write_activation_stack(const ActivationStack& s, const fs::path& manifest) {
  const auto shapes = s.shapes();
  std::vector<float> flat;
  append_stack(flat, s, shapes);
  fs::path payload;
  const auto checksum = write_payload(manifest, flat, payload);
  detail::write_json_file(manifest, json{{"layers", shapes_to_json(shapes)},
                                         {"checksum", format_checksum(checksum)},
                                         {"payload_file", payload.filename().string()}});
}

ActivationStack read_activation_stack(const fs::path& manifest) {
  const json doc = detail::read_json_file(manifest);
  const auto shapes = shapes_from_json(doc, manifest);
  const auto flat = read_payload(manifest, doc, floats_per_stack(shapes));
  std::span<const float> view(flat);
  ActivationStack s = take_stack(view, shapes);
  check_activation_stack(s);
  return s;
}

void write_2afc_set(std::span<const Triple2AFC> items, const fs::path& manifest) {
  if (items.empty()) {
    throw std::invalid_argument("2AFC set needs at least one item");
  }
  const auto shapes = items.front().ref.shapes();
  std::vector<float> flat;
  json meta = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    check_pref(items[i].human_pref, i);
    append_stack(flat, items[i].ref, shapes);
    append_stack(flat, items[i].p0, shapes);
    append_stack(flat, items[i].p1, shapes);
    meta.push_back({{"item_id", items[i].item_id}, {"human_pref", items[i].human_pref}});
  }
  fs::path payload;
  const auto checksum = write_payload(manifest, flat, payload);
  detail::write_json_file(manifest, json{{"schema_version", 1},
                                         {"layers", shapes_to_json(shapes)},
                                         {"items", meta},
                                         {"checksum", format_checksum(checksum)},
                                         {"payload_file", payload.filename().string()}});
}

std::vector<Triple2AFC> read_2afc_set(const fs::path& manifest) {
  const json doc = detail::read_json_file(manifest);
  const auto shapes = shapes_from_json(doc, manifest);
  const auto meta = detail::field<json>(doc, "items", manifest);
  if (!meta.is_array() || meta.empty()) {
    throw DataError("'" + manifest.string() + "': 'items' must be a non-empty array");
  }
  const auto flat = read_payload(manifest, doc, 3 * meta.size() * floats_per_stack(shapes));
  std::span<const float> view(flat);
  std::vector<Triple2AFC> items;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    Triple2AFC t;
    t.item_id = detail::field<std::string>(meta[i], "item_id", manifest);
    t.human_pref = detail::field<double>(meta[i], "human_pref", manifest);
    check_pref(t.human_pref, i);
    t.ref = take_stack(view, shapes);
    t.p0 = take_stack(view, shapes);
    t.p1 = take_stack(view, shapes);
    check_activation_stack(t.ref);
    check_activation_stack(t.p0);
    check_activation_stack(t.p1);
    items.push_back(std::move(t));
  }
  return items;
}

LayerWeights read_layer_weights(const fs::path& path) {
  const json doc = detail::read_json_file(path);
  LayerWeights w;
  w.per_layer = detail::field<std::vector<std::vector<double>>>(doc, "layers", path);
  for (const auto& layer : w.per_layer) {
    for (double v : layer) {
      if (!std::isfinite(v) || v < 0.0) {
        throw DataError("'" + path.string() + "': weights must be finite and non-negative");
      }
    }
  }
  return w;
}

void write_layer_weights(const LayerWeights& w, const fs::path& path) {
  detail::write_json_file(path, json{{"layers", w.per_layer}});
}

}  // namespace simfuse
