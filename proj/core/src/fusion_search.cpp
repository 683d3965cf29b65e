#include "simfuse/fusion_search.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "simfuse/error.hpp"
#include "simfuse/parallel.hpp"

namespace simfuse {

std::string_view to_string(FusionMode mode) noexcept {
  return mode == FusionMode::raw ? "raw" : "normalized";
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "raw") {
    return FusionMode::raw;
  }
  if (text == "normalized") {
    return FusionMode::normalized;
  }
  throw std::invalid_argument("unknown fusion mode '" + std::string(text) + "'");
}

std::vector<SubsetMask> enumerate_subsets(std::size_t m) {
  if (m < 1 || m > kMaxReprs) {
    throw std::out_of_range("representation count " + std::to_string(m) + " outside [1, " +
                            std::to_string(kMaxReprs) + "]");
  }
  const std::uint64_t total = (std::uint64_t{1} << m) - 1;
  std::vector<SubsetMask> out;
  out.reserve(total);
  for (std::uint64_t s = 1; s <= total; ++s) {
    out.push_back(gray_mask(s));
  }
  return out;
}

GrayAccumulator::GrayAccumulator(std::span<const SimilarityMatrix> stack, FusionMode mode,
                                 std::span<const NormStats> stats, std::size_t row_begin,
                                 std::size_t row_end)
    : stack_(stack),
      mode_(mode),
      stats_(stats.begin(), stats.end()),
      n_(stack.empty() ? 0 : stack.front().n),
      row_begin_(row_begin),
      row_end_(row_end) {
  if (stack.empty()) {
    throw std::invalid_argument("similarity stack is empty");
  }
  if (stack.size() > kMaxReprs) {
    throw std::invalid_argument("too many representations (" + std::to_string(stack.size()) +
                                " > " + std::to_string(kMaxReprs) + ")");
  }
  for (const auto& m : stack) {
    if (m.n != n_ || m.values.size() != n_ * n_) {
      throw std::invalid_argument("similarity matrices disagree on N");
    }
  }
  if (mode == FusionMode::normalized && stats.size() != stack.size()) {
    throw std::invalid_argument("normalized fusion needs one NormStats per matrix");
  }
  if (row_begin > row_end || row_end > n_) {
    throw std::out_of_range("accumulator row range outside [0, N]");
  }
  acc_.assign((row_end - row_begin) * n_, 0.0);
}

void GrayAccumulator::apply(std::size_t m, double sign) {
  const float* src = stack_[m].values.data() + row_begin_ * n_;
  const std::size_t count = acc_.size();
  if (mode_ == FusionMode::raw) {
    for (std::size_t e = 0; e < count; ++e) {
      acc_[e] += sign * static_cast<double>(src[e]);
    }
  } else {
    const NormStats s = stats_[m];
    for (std::size_t e = 0; e < count; ++e) {
      acc_[e] += sign * normalized_term(src[e], s);
    }
  }
}

void GrayAccumulator::assign(SubsetMask mask) {
  std::fill(acc_.begin(), acc_.end(), 0.0);
  for (std::size_t m : mask.members()) {
    apply(m, 1.0);
  }
  mask_ = mask;
}

void GrayAccumulator::toggle(std::size_t m) {
  if (mask_.contains(m)) {
    apply(m, -1.0);
    mask_ = mask_.without(m);
  } else {
    apply(m, 1.0);
    mask_ = mask_.with(m);
  }
}

std::size_t SearchResults::recall_of(SubsetMask mask) const {
  if (!contains(mask)) {
    throw std::out_of_range("subset mask " + std::to_string(mask.bits()) +
                            " not present in search results");
  }
  return entries[mask.bits() - 1].recall;
}

SearchResults search_all(std::span<const SimilarityMatrix> stack, FusionMode mode,
                         std::span<const NormStats> stats, const SearchOptions& options) {
  if (stack.empty()) {
    throw std::invalid_argument("similarity stack is empty");
  }
  const std::size_t m_count = stack.size();
  if (m_count > kMaxReprs) {
    throw std::invalid_argument("refusing to enumerate 2^" + std::to_string(m_count) +
                                " subsets (limit M <= " + std::to_string(kMaxReprs) + ")");
  }
  const std::size_t n = stack.front().n;
  if (options.k < 1 || options.k > n) {
    throw std::out_of_range("recall cutoff k=" + std::to_string(options.k) + " outside [1, " +
                            std::to_string(n) + "]");
  }
  const std::uint64_t total = (std::uint64_t{1} << m_count) - 1;
  const std::size_t tile = std::max<std::size_t>(1, options.tile_rows);
  const std::size_t n_tiles = (n + tile - 1) / tile;

  std::vector<std::atomic<std::uint32_t>> counts(total);
  std::vector<char> hit_bits(options.keep_hits ? total * n : 0, 0);

  parallel_for(n_tiles, options.workers, [&](unsigned, std::size_t t) {
    const std::size_t r0 = t * tile;
    const std::size_t r1 = std::min(n, r0 + tile);
    GrayAccumulator acc(stack, mode, stats, r0, r1);
    for (std::uint64_t s = 1; s <= total; ++s) {
      const SubsetMask mask = gray_mask(s);
      if ((s - 1) % kResumInterval == 0) {
        acc.assign(mask);
      } else {
        acc.toggle(static_cast<std::size_t>(std::countr_zero(s)));
      }
      std::uint32_t local = 0;
      for (std::size_t i = r0; i < r1; ++i) {
        const bool hit = rank_of(acc.row(i), i) < options.k;
        local += hit ? 1U : 0U;
        if (options.keep_hits && hit) {
          hit_bits[(mask.bits() - 1) * n + i] = 1;
        }
      }
      counts[mask.bits() - 1].fetch_add(local, std::memory_order_relaxed);
    }
  });

  SearchResults out;
  out.mode = mode;
  out.m = m_count;
  out.n = n;
  out.k = options.k;
  out.entries.reserve(total);
  for (std::uint64_t b = 1; b <= total; ++b) {
    out.entries.push_back({SubsetMask(static_cast<std::uint32_t>(b)), counts[b - 1].load()});
  }
  if (options.keep_hits) {
    out.hits.reserve(total);
    for (std::uint64_t b = 0; b < total; ++b) {
      std::vector<bool> h(n);
      for (std::size_t i = 0; i < n; ++i) {
        h[i] = hit_bits[b * n + i] != 0;
      }
      out.hits.push_back(std::move(h));
    }
  }
  return out;
}

std::vector<BestPoint> best_per_size(const SearchResults& results) {
  std::vector<BestPoint> curve(results.m);
  std::vector<bool> seen(results.m, false);
  for (std::size_t k = 0; k < results.m; ++k) {
    curve[k].size = k + 1;
  }
  for (const auto& e : results.entries) {
    const std::size_t idx = e.mask.size() - 1;
    if (!seen[idx] || e.recall > curve[idx].recall) {
      curve[idx].recall = e.recall;
      curve[idx].mask = e.mask;
      seen[idx] = true;
    }
  }
  return curve;
}

SearchEntry best_overall(const SearchResults& results) {
  if (results.entries.empty()) {
    throw std::invalid_argument("empty search results");
  }
  SearchEntry best = results.entries.front();
  for (const auto& e : results.entries) {
    if (e.recall > best.recall) {
      best = e;
    }
  }
  return best;
}

void write_search_csv(std::ostream& out, const SearchResults& results,
                      const std::vector<std::string>& names) {
  out << "subset,n_r,recall\n";
  for (const auto& e : results.entries) {
    out << mask_to_names(e.mask, names) << ',' << e.mask.size() << ',' << e.recall << '\n';
  }
}

SearchResults read_search_csv(std::istream& in, FusionMode mode,
                              const std::vector<std::string>& names) {
  std::string line;
  if (!std::getline(in, line) || line != "subset,n_r,recall") {
    throw DataError("search CSV: missing or unexpected header");
  }
  const std::uint64_t total = (std::uint64_t{1} << names.size()) - 1;
  SearchResults r;
  r.mode = mode;
  r.m = names.size();
  r.entries.assign(total, SearchEntry{});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    std::string subset;
    std::string n_r;
    std::string recall;
    if (!std::getline(fields, subset, ',') || !std::getline(fields, n_r, ',') ||
        !std::getline(fields, recall)) {
      throw DataError("search CSV line " + std::to_string(line_no) + ": expected 3 fields");
    }
    const SubsetMask mask = mask_from_names(subset, names);
    if (!r.entries[mask.bits() - 1].mask.empty()) {
      throw DataError("search CSV line " + std::to_string(line_no) + ": duplicate subset");
    }
    try {
      if (std::stoul(n_r) != mask.size()) {
        throw DataError("search CSV line " + std::to_string(line_no) + ": n_r disagrees");
      }
      r.entries[mask.bits() - 1] = {mask, std::stoul(recall)};
    } catch (const std::logic_error&) {
      throw DataError("search CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  for (const auto& e : r.entries) {
    if (e.mask.empty()) {
      throw DataError("search CSV does not cover all " + std::to_string(total) + " subsets");
    }
  }
  return r;
}

void write_best_per_size_csv(std::ostream& out, const std::vector<BestPoint>& curve,
                             const std::vector<std::string>& names) {
  out << "n_r,best_recall,subset\n";
  for (const auto& p : curve) {
    out << p.size << ',' << p.recall << ',' << mask_to_names(p.mask, names) << '\n';
  }
}

}  // namespace simfuse
