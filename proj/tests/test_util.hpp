#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "simfuse/feature_store.hpp"
#include "simfuse/rng.hpp"
#include "simfuse/similarity.hpp"

namespace simfuse::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("simfuse_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back("item" + std::to_string(i));
  }
  return out;
}

/// n unit rows of dimension dim drawn from the portable generator.
inline FeatureSet random_unit_set(const std::string& name, std::size_t n, std::size_t dim,
                                  SplitMix64& rng) {
  FeatureSet fs{name, n, dim, std::vector<float>(n * dim), ids(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    std::vector<double> v(dim);
    for (auto& x : v) {
      x = rng.gaussian();
      sq += x * x;
    }
    for (std::size_t d = 0; d < dim; ++d) {
      fs.rows[i * dim + d] = static_cast<float>(v[d] / std::sqrt(sq));
    }
  }
  return fs;
}

/// N x N matrix with entries uniform in [-1, 1).
inline SimilarityMatrix random_matrix(const std::string& name, std::size_t n, SplitMix64& rng) {
  SimilarityMatrix m{name, n, std::vector<float>(n * n)};
  for (auto& v : m.values) {
    v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  }
  return m;
}

/// Entries on the dyadic grid k / 2^16, so a*v + b stays exact in float for
/// the small a, b used by the affine-invariance checks.
inline SimilarityMatrix dyadic_matrix(const std::string& name, std::size_t n, SplitMix64& rng) {
  SimilarityMatrix m{name, n, std::vector<float>(n * n)};
  for (auto& v : m.values) {
    const auto k = static_cast<std::int64_t>(rng.below(1U << 17)) - (1 << 16);
    v = static_cast<float>(static_cast<double>(k) / 65536.0);
  }
  return m;
}

/// Argsort oracle: selection of the max with lowest index first, O(N^2).
template <typename T>
std::vector<std::size_t> naive_argsort_desc(std::span<const T> row) {
  std::vector<bool> used(row.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t step = 0; step < row.size(); ++step) {
    std::size_t best = row.size();
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!used[j] && (best == row.size() || row[j] > row[best])) {
        best = j;
      }
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

}  // namespace simfuse::testing
