#include "simfuse/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "io_util.hpp"
#include "simfuse/error.hpp"
#include "simfuse/rng.hpp"

namespace simfuse {

namespace fs = std::filesystem;
using detail::json;

namespace {

std::string default_repr_name(std::size_t m) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "r%02zu", m);
  return buf;
}

std::string item_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "pair_%05zu", i);
  return buf;
}

/// Writes normalize(v) into dst; returns false for a (numerically) zero vector.
bool store_normalized(std::span<const double> v, float* dst) {
  double sq = 0.0;
  for (double x : v) {
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    return false;
  }
  for (std::size_t d = 0; d < v.size(); ++d) {
    dst[d] = static_cast<float>(v[d] / norm);
  }
  return true;
}

}  // namespace

SynthSpec SynthSpec::disjoint_halves(std::size_t n_pairs, std::size_t dim, std::uint64_t seed) {
  SynthSpec s;
  s.n_pairs = n_pairs;
  s.n_reprs = 2;
  s.dim = dim;
  s.seed = seed;
  s.signal.resize(2);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    s.signal[i < n_pairs / 2 ? 0 : 1].push_back(i);
  }
  return s;
}

void check_synth_spec(const SynthSpec& spec) {
  if (spec.n_pairs == 0 || spec.n_reprs == 0 || spec.dim == 0) {
    throw std::invalid_argument("synthetic spec needs n_pairs, n_reprs and dim >= 1");
  }
  if (spec.n_reprs > kMaxReprs) {
    throw std::invalid_argument("synthetic spec has more than " + std::to_string(kMaxReprs) +
                                " representations");
  }
  if (spec.signal.size() != spec.n_reprs) {
    throw std::invalid_argument("signal assignment must list one entry per representation");
  }
  for (const auto& set : spec.signal) {
    for (std::size_t i : set) {
      if (i >= spec.n_pairs) {
        throw std::invalid_argument("signal index " + std::to_string(i) + " >= n_pairs");
      }
    }
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw std::invalid_argument("noise_sigma must be finite and >= 0");
  }
  if (!spec.repr_names.empty() && spec.repr_names.size() != spec.n_reprs) {
    throw std::invalid_argument("repr_names must be empty or list every representation");
  }
}

SynthSpec read_synth_spec(const fs::path& path) {
  const json doc = detail::read_json_file(path);
  SynthSpec s;
  s.n_pairs = detail::field<std::size_t>(doc, "n_pairs", path);
  s.n_reprs = detail::field<std::size_t>(doc, "n_reprs", path);
  s.dim = detail::field<std::size_t>(doc, "dim", path);
  s.noise_sigma = doc.value("noise_sigma", 0.0);
  s.seed = detail::field<std::uint64_t>(doc, "seed", path);
  if (doc.contains("repr_names")) {
    s.repr_names = detail::field<std::vector<std::string>>(doc, "repr_names", path);
  }
  const auto assignment = detail::field<json>(doc, "signal_assignment", path);
  if (!assignment.is_array()) {
    throw DataError("'" + path.string() + "': signal_assignment must be an array");
  }
  for (const auto& entry : assignment) {
    std::vector<std::size_t> set;
    if (entry.is_string()) {
      const auto word = entry.get<std::string>();
      if (word == "all") {
        for (std::size_t i = 0; i < s.n_pairs; ++i) {
          set.push_back(i);
        }
      } else if (word != "none") {
        throw DataError("'" + path.string() + "': unknown signal keyword '" + word + "'");
      }
    } else if (entry.is_object()) {
      const auto b = detail::field<std::size_t>(entry, "begin", path);
      const auto e = detail::field<std::size_t>(entry, "end", path);
      for (std::size_t i = b; i < e; ++i) {
        set.push_back(i);
      }
    } else if (entry.is_array()) {
      try {
        set = entry.get<std::vector<std::size_t>>();
      } catch (const json::exception& ex) {
        throw DataError("'" + path.string() + "': bad signal index list: " + ex.what());
      }
    } else {
      throw DataError("'" + path.string() + "': bad signal_assignment entry");
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    s.signal.push_back(std::move(set));
  }
  try {
    check_synth_spec(s);
  } catch (const std::invalid_argument& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
  return s;
}

void write_synth_spec(const SynthSpec& spec, const fs::path& path) {
  json doc{{"n_pairs", spec.n_pairs},     {"n_reprs", spec.n_reprs},
           {"dim", spec.dim},             {"noise_sigma", spec.noise_sigma},
           {"seed", spec.seed},           {"signal_assignment", spec.signal}};
  if (!spec.repr_names.empty()) {
    doc["repr_names"] = spec.repr_names;
  }
  detail::write_json_file(path, doc);
}

PairedGallery generate_gallery(const SynthSpec& spec) {
  check_synth_spec(spec);
  const std::size_t n = spec.n_pairs;
  const std::size_t dim = spec.dim;
  SplitMix64 rng(spec.seed);
  std::vector<double> scratch(dim);

  auto draw = [&] {
    for (double& x : scratch) {
      x = rng.gaussian();
    }
  };

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = item_id(i);
  }

  std::vector<FeatureSet> left;
  std::vector<FeatureSet> right;
  for (std::size_t m = 0; m < spec.n_reprs; ++m) {
    const std::string name = spec.repr_names.empty() ? default_repr_name(m) : spec.repr_names[m];
    FeatureSet l{name, n, dim, std::vector<float>(n * dim), ids};
    FeatureSet r{name, n, dim, std::vector<float>(n * dim), ids};
    for (std::size_t i = 0; i < n; ++i) {
      do {
        draw();
      } while (!store_normalized(scratch, l.rows.data() + i * dim));
    }
    std::vector<bool> signal(n, false);
    for (std::size_t i : spec.signal[m]) {
      signal[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      bool stored = false;
      while (!stored) {
        draw();
        if (signal[i]) {
          const float* src = l.rows.data() + i * dim;
          for (std::size_t d = 0; d < dim; ++d) {
            scratch[d] = static_cast<double>(src[d]) + spec.noise_sigma * scratch[d];
          }
        }
        stored = store_normalized(scratch, r.rows.data() + i * dim);
      }
    }
    left.push_back(std::move(l));
    right.push_back(std::move(r));
  }
  return make_gallery(std::move(left), std::move(right));
}

fs::path write_synth_gallery(const SynthSpec& spec, const fs::path& dir) {
  return write_gallery(generate_gallery(spec), dir);
}

namespace {

float naive_cosine(const FeatureSet& l, const FeatureSet& r, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < l.dim; ++d) {
    acc += static_cast<double>(l.rows[i * l.dim + d]) * static_cast<double>(r.rows[j * r.dim + d]);
  }
  return static_cast<float>(acc);
}

}  // namespace

std::size_t brute_force_recall(const PairedGallery& gallery, SubsetMask subset, FusionMode mode) {
  const std::size_t n = gallery.n_pairs;
  if (n > kBruteForceMaxPairs) {
    throw std::invalid_argument("brute_force_recall is limited to N <= " +
                                std::to_string(kBruteForceMaxPairs));
  }
  if (subset.empty()) {
    throw std::invalid_argument("fusion subset is empty");
  }
  std::vector<std::size_t> members;
  for (std::size_t m = 0; m < gallery.n_reprs(); ++m) {
    if (subset.contains(m)) {
      members.push_back(m);
    }
  }

  std::vector<double> mean(gallery.n_reprs(), 0.0);
  std::vector<double> sd(gallery.n_reprs(), 1.0);
  if (mode == FusionMode::normalized) {
    for (std::size_t m : members) {
      const auto& l = gallery.left[m];
      const auto& r = gallery.right[m];
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          sum += naive_cosine(l, r, i, j);
        }
      }
      const double mu = sum / static_cast<double>(n * n);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double dev = naive_cosine(l, r, i, j) - mu;
          sq += dev * dev;
        }
      }
      mean[m] = mu;
      sd[m] = std::sqrt(sq / static_cast<double>(n * n));
    }
  }

  auto fused = [&](std::size_t i, std::size_t j) {
    double total = 0.0;
    for (std::size_t m : members) {
      const float v = naive_cosine(gallery.left[m], gallery.right[m], i, j);
      if (mode == FusionMode::raw) {
        total += static_cast<double>(v);
      } else if (sd[m] >= 1e-9) {
        total += (static_cast<double>(v) - mean[m]) / sd[m];
      }
    }
    return total;
  };

  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double truth = fused(i, i);
    bool first = true;
    for (std::size_t j = 0; j < n && first; ++j) {
      if (j == i) {
        continue;
      }
      const double other = fused(i, j);
      if (other > truth || (other == truth && j < i)) {
        first = false;
      }
    }
    hits += first ? 1 : 0;
  }
  return hits;
}

std::vector<Triple2AFC> generate_2afc_items(std::size_t n_items,
                                            std::span<const LayerShape> shapes,
                                            std::size_t planted_layer, std::uint64_t seed) {
  if (n_items == 0) {
    throw std::invalid_argument("generate_2afc_items needs n_items >= 1");
  }
  if (shapes.empty() || planted_layer >= shapes.size()) {
    throw std::invalid_argument("planted layer must index one of the given layers");
  }
  for (const auto& s : shapes) {
    if (s.h == 0 || s.w == 0 || s.c == 0) {
      throw std::invalid_argument("layer shapes must have non-zero dimensions");
    }
  }
  SplitMix64 rng(seed);
  std::vector<Triple2AFC> items;
  items.reserve(n_items);
  for (std::size_t it = 0; it < n_items; ++it) {
    Triple2AFC t;
    t.item_id = item_id(it);
    const bool p1_closer = rng.uniform() < 0.5;
    t.human_pref = p1_closer ? 0.9 : 0.1;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      const LayerShape s = shapes[l];
      ActivationLayer ref{s, std::vector<float>(s.size())};
      ActivationLayer p0{s, std::vector<float>(s.size())};
      ActivationLayer p1{s, std::vector<float>(s.size())};
      for (float& v : ref.values) {
        v = static_cast<float>(rng.gaussian());
      }
      const bool planted = l == planted_layer;
      auto fill = [&](ActivationLayer& out, bool closer) {
        for (std::size_t k = 0; k < out.values.size(); ++k) {
          const double g = rng.gaussian();
          if (!planted) {
            out.values[k] = static_cast<float>(ref.values[k] + g);
          } else if (closer) {
            out.values[k] = static_cast<float>(ref.values[k] + 0.05 * g);
          } else {
            out.values[k] = static_cast<float>(g);
          }
        }
      };
      fill(p0, !p1_closer);
      fill(p1, p1_closer);
      t.ref.layers.push_back(std::move(ref));
      t.p0.layers.push_back(std::move(p0));
      t.p1.layers.push_back(std::move(p1));
    }
    t.ref = channel_normalize(t.ref);
    t.p0 = channel_normalize(t.p0);
    t.p1 = channel_normalize(t.p1);
    items.push_back(std::move(t));
  }
  return items;
}

}  // namespace simfuse

namespace simfuse {

SynthKind read_synth_kind(const fs::path& path) {
  const json doc = detail::read_json_file(path);
  if (!doc.is_object()) {
    throw DataError("'" + path.string() + "': synthetic spec must be a JSON object");
  }
  const std::string kind = doc.value("kind", std::string("gallery"));
  if (kind == "gallery") {
    return SynthKind::gallery;
  }
  if (kind == "2afc") {
    return SynthKind::two_afc;
  }
  throw DataError("'" + path.string() + "': unknown kind '" + kind + "'");
}

Synth2AFCSpec read_synth_2afc_spec(const fs::path& path) {
  const json doc = detail::read_json_file(path);
  Synth2AFCSpec s;
  s.n_items = detail::field<std::size_t>(doc, "n_items", path);
  s.planted_layer = detail::field<std::size_t>(doc, "planted_layer", path);
  s.seed = detail::field<std::uint64_t>(doc, "seed", path);
  for (const auto& l : detail::field<json>(doc, "layers", path)) {
    s.layers.push_back({detail::field<std::size_t>(l, "h", path),
                        detail::field<std::size_t>(l, "w", path),
                        detail::field<std::size_t>(l, "c", path)});
  }
  return s;
}

}  // namespace simfuse
