#pragma once

#include "fdp/nn/parameter_store.hpp"
#include "fdp/nn/unet.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace fdp::nn {

inline constexpr char kCheckpointMagic[4] = {'F', 'D', 'P', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On disk: "FDPC", u32 version, u64 metadata length, UTF-8 JSON metadata,
/// raw parameter blob, EMA blob. All integers and floats little-endian,
/// floats 32-bit, tensors in store order.
struct Checkpoint {
  NetworkConfig network;
  nlohmann::json normalizer;
  nlohmann::json policy;
  std::int64_t step = 0;
  ParameterStore<float> params;
  ParameterStore<float> ema;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fdp::nn
