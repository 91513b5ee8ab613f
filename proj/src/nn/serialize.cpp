#include "emg2artic/nn/serialize.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

namespace emg2artic::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_f32_le(std::vector<char>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_weights(const ParamStore& store, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<char> payload;
  json params = json::array();
  for (const auto& e : store.entries()) {
    params.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", payload.size()}, {"trainable", e.trainable}});
    const MatD& v = e.var.value();
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f32_le(payload, static_cast<float>(v.data()[i]));
  }
  json manifest = {{"format", "emg2artic-weights"},
                   {"version", 1},
                   {"dtype", "float32"},
                   {"byte_order", "little"},
                   {"total_bytes", payload.size()},
                   {"parameters", params}};
  std::ofstream bin(dir / "weights.bin", std::ios::binary);
  bin.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  if (!bin) throw std::runtime_error("failed to write " + (dir / "weights.bin").string());
}

void load_weights(ParamStore& store, const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw FormatError("missing " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  if (!bin) throw FormatError("missing " + (dir / "weights.bin").string());
  const std::vector<char> payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  const auto& params = manifest.at("parameters");
  auto& entries = store.entries();
  if (params.size() != entries.size())
    throw FormatError("manifest lists " + std::to_string(params.size()) + " parameters, model has " +
                      std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = params[i];
    auto& e = entries[i];
    if (p.at("name").get<std::string>() != e.name) throw FormatError("parameter order mismatch at " + e.name);
    if (p.at("shape").get<std::vector<Eigen::Index>>() != e.shape) throw FormatError("shape mismatch for " + e.name);
    const auto offset = p.at("offset").get<std::size_t>();
    MatD& v = e.var.mutable_value();
    if (offset + 4 * static_cast<std::size_t>(v.size()) > payload.size())
      throw FormatError("weights.bin truncated at " + e.name);
    for (Eigen::Index k = 0; k < v.size(); ++k)
      v.data()[k] = get_f32_le(payload.data() + offset + 4 * static_cast<std::size_t>(k));
  }
}

}  // namespace emg2artic::nn
