#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "simfuse/error.hpp"

namespace simfuse::detail {

using json = nlohmann::json;

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': JSON parse error at byte " +
                    std::to_string(e.byte) + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot create '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw DataError("write failed for '" + path.string() + "'");
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot create '" + path.string() + "'");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw DataError("write failed for '" + path.string() + "'");
  }
}

inline std::vector<std::byte> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) {
    throw DataError("read failed for '" + path.string() + "'");
  }
  return bytes;
}

/// Typed field access with a DataError naming the file and field.
template <typename T>
T field(const json& doc, const char* key, const std::filesystem::path& origin) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw DataError("'" + origin.string() + "': missing field '" + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError("'" + origin.string() + "': bad field '" + key + "': " + e.what());
  }
}

}  // namespace simfuse::detail
