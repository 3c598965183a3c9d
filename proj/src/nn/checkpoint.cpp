#include "fdp/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fdp::nn {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos, const char* what) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

nlohmann::json manifest(const ParameterStore<float>& store) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : store) out.push_back({{"name", t.name}, {"shape", t.shape}});
  return out;
}

void put_blob(std::string& out, const ParameterStore<float>& store) {
  for (const auto& t : store) {
    for (float v : t.data) put_le(out, v);
  }
}

void get_blob(const std::string& in, std::size_t& pos, ParameterStore<float>& store, const char* what) {
  for (auto& t : store) {
    for (auto& v : t.data) v = get_le<float>(in, pos, what);
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.params.same_layout(ckpt.ema)) throw CheckpointError("EMA store does not match the parameter layout");
  const nlohmann::json meta = {{"network", ckpt.network.to_json()},
                               {"normalizer", ckpt.normalizer},
                               {"policy", ckpt.policy},
                               {"step", ckpt.step},
                               {"parameters", manifest(ckpt.params)}};
  const std::string meta_text = meta.dump();
  std::string out(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  put_blob(out, ckpt.params);
  put_blob(out, ckpt.ema);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("bad checkpoint magic (expected FDPC)");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto meta_len = get_le<std::uint64_t>(bytes, pos, "metadata length");
  if (pos + meta_len > bytes.size()) throw CheckpointError("truncated checkpoint metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(pos, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  pos += meta_len;

  Checkpoint ckpt;
  nlohmann::json stored_manifest;
  try {
    ckpt.network = NetworkConfig::from_json(meta.at("network"));
    ckpt.normalizer = meta.at("normalizer");
    ckpt.policy = meta.at("policy");
    ckpt.step = meta.at("step").get<std::int64_t>();
    stored_manifest = meta.at("parameters");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
  }
  const ConditionalUnet1D<float> net(ckpt.network);
  ckpt.params = net.layout();
  if (manifest(ckpt.params) != stored_manifest) {
    throw CheckpointError("checkpoint parameter manifest does not match the network config");
  }
  ckpt.ema = ckpt.params;
  get_blob(bytes, pos, ckpt.params, "parameter blob");
  get_blob(bytes, pos, ckpt.ema, "EMA blob");
  if (pos != bytes.size()) throw CheckpointError("trailing bytes after the EMA blob");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace fdp::nn
