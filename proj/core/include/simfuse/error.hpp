#pragma once

#include <stdexcept>
#include <string>

namespace simfuse {

/// Malformed, inconsistent or corrupt input data (files, matrices, tables).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by ingest validation; carries the offending row.
class ZeroNormRowError : public DataError {
 public:
  ZeroNormRowError(const std::string& repr, std::size_t row)
      : DataError("representation '" + repr + "': row " + std::to_string(row) +
                  " has zero norm (cosine similarity undefined)"),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace simfuse
