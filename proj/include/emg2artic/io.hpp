#pragma once

// Small file helpers shared by the corpus, checkpoint and report writers:
// little-endian binary32 blobs and JSON documents.

#include "emg2artic/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace emg2artic::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

void write_f32(const fs::path& path, std::span<const float> values);
/// Reads a whole binary32 file. When `expected` is non-negative the element
/// count must match exactly. Throws FormatError.
std::vector<float> read_f32(const fs::path& path, long long expected = -1);

json read_json(const fs::path& path);
/// Pretty-printed, key-sorted, newline-terminated.
void write_json(const fs::path& path, const json& doc);
void write_text(const fs::path& path, const std::string& text);

/// Typed field access that turns a missing key or wrong type into
/// FormatError naming the file.
template <typename T>
T field(const json& doc, const char* key, const fs::path& origin) {
  if (!doc.is_object() || !doc.contains(key)) throw FormatError(origin.string() + ": missing field '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(origin.string() + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace emg2artic::io
