#pragma once

#include "emg2artic/nn/params.hpp"

#include <filesystem>

namespace emg2artic::nn {

/// Writes `weights.bin` (little-endian binary32, parameters concatenated in
/// store order) and `manifest.json` (name, shape, byte offset per entry).
void save_weights(const ParamStore& store, const std::filesystem::path& dir);

/// Loads values into a store with the same layout. Throws FormatError on a
/// missing file, a name/shape mismatch or a truncated payload.
void load_weights(ParamStore& store, const std::filesystem::path& dir);

}  // namespace emg2artic::nn
