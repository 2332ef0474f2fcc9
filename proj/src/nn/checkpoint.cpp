#include "uwdt/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "uwdt/common/bytes.hpp"
#include "uwdt/data/dataset_io.hpp"

namespace uwdt::nn {

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  const auto& e = cfg.encoder;
  return {
      {"encoder",
       {{"in_channels", e.in_channels},
        {"height", e.height},
        {"width", e.width},
        {"channels", e.channels},
        {"embed", e.embed},
        {"dropout", e.dropout},
        {"bn_momentum", e.bn_momentum},
        {"bn_eps", e.bn_eps}}},
      {"context", cfg.context},
      {"d_model", cfg.d_model},
      {"layers", cfg.layers},
      {"heads", cfg.heads},
      {"max_timestep", cfg.max_timestep},
      {"return_scale", cfg.return_scale},
      {"mode", mode_name(cfg.mode)},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      cfg.encoder.in_channels = e.value("in_channels", cfg.encoder.in_channels);
      cfg.encoder.height = e.value("height", cfg.encoder.height);
      cfg.encoder.width = e.value("width", cfg.encoder.width);
      if (e.contains("channels")) cfg.encoder.channels = e.at("channels").get<std::array<int, 3>>();
      cfg.encoder.embed = e.value("embed", cfg.encoder.embed);
      cfg.encoder.dropout = e.value("dropout", cfg.encoder.dropout);
      cfg.encoder.bn_momentum = e.value("bn_momentum", cfg.encoder.bn_momentum);
      cfg.encoder.bn_eps = e.value("bn_eps", cfg.encoder.bn_eps);
    }
    cfg.context = j.value("context", cfg.context);
    cfg.d_model = j.value("d_model", cfg.d_model);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.max_timestep = j.value("max_timestep", cfg.max_timestep);
    cfg.return_scale = j.value("return_scale", cfg.return_scale);
    if (j.contains("mode")) cfg.mode = mode_from_name(j.at("mode").get<std::string>());
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("model config: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<std::uint8_t> encode_checkpoint(const SeqModel<float>& model) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put_string(model_config_to_json(model.config()).dump());
  auto tensors = model.parameters();
  for (const auto* b : model.buffers()) tensors.push_back(b);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t->name.size()));
    w.put_bytes(t->name.data(), t->name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->value.cols()));
    w.put_bytes(t->value.data(), sizeof(float) * static_cast<std::size_t>(t->value.size()));
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc =
      crc32_of(std::span<const std::uint8_t>(bytes.data() + sizeof kCheckpointMagic, bytes.size() - sizeof kCheckpointMagic));
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

SeqModel<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::optional<ModelConfig>& expected) {
  using K = CheckpointErrorKind;
  if (bytes.size() < sizeof kCheckpointMagic) throw CheckpointError(K::truncated, "checkpoint shorter than its magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CheckpointError(K::bad_magic, "not a checkpoint (bad magic)");
  if (bytes.size() < sizeof kCheckpointMagic + 2 + 4) throw CheckpointError(K::truncated, "checkpoint truncated");
  ByteReader r(bytes.data() + sizeof kCheckpointMagic, bytes.size() - sizeof kCheckpointMagic);
  std::uint16_t version = 0;
  r.get(version);
  if (version != kCheckpointVersion)
    throw CheckpointError(K::version_mismatch, "checkpoint version " + std::to_string(version) + " is not supported");
  const std::size_t body = bytes.size() - sizeof kCheckpointMagic - 4;
  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  std::string config_text;
  if (!r.get_string(config_text)) throw CheckpointError(K::truncated, "checkpoint truncated in config");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(nlohmann::json::parse(config_text));
  } catch (const std::exception& ex) {
    if (crc32_of(std::span<const std::uint8_t>(bytes.data() + sizeof kCheckpointMagic, body)) != stored_crc)
      throw CheckpointError(K::checksum_mismatch, "checkpoint checksum mismatch");
    throw CheckpointError(K::config_mismatch, std::string("checkpoint config unreadable: ") + ex.what());
  }
  std::uint32_t count = 0;
  if (!r.get(count)) throw CheckpointError(K::truncated, "checkpoint truncated in tensor count");
  std::map<std::string, Mat<float>> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = 0;
    std::string name;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    if (!r.get(len)) throw CheckpointError(K::truncated, "checkpoint truncated in tensor header");
    name.resize(len);
    if (!r.get_bytes(name.data(), len) || !r.get(rows) || !r.get(cols))
      throw CheckpointError(K::truncated, "checkpoint truncated in tensor header");
    if (static_cast<std::uint64_t>(rows) * cols * sizeof(float) > r.remaining())
      throw CheckpointError(K::truncated, "checkpoint truncated in tensor " + name);
    Mat<float> m(rows, cols);
    r.get_bytes(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
    stored.emplace(std::move(name), std::move(m));
  }
  if (r.remaining() != 4) throw CheckpointError(K::truncated, "checkpoint has unexpected trailing bytes or is truncated");
  if (crc32_of(std::span<const std::uint8_t>(bytes.data() + sizeof kCheckpointMagic, body)) != stored_crc)
    throw CheckpointError(K::checksum_mismatch, "checkpoint checksum mismatch");
  if (expected && !(*expected == cfg)) throw CheckpointError(K::config_mismatch, "checkpoint config differs from the requested model");

  SeqModel<float> model(cfg);
  auto tensors = model.parameters();
  for (auto* b : model.buffers()) tensors.push_back(b);
  if (tensors.size() != stored.size()) throw CheckpointError(K::config_mismatch, "checkpoint tensor set does not match its config");
  for (auto* t : tensors) {
    auto it = stored.find(t->name);
    if (it == stored.end()) throw CheckpointError(K::config_mismatch, "checkpoint lacks tensor " + t->name);
    if (it->second.rows() != t->value.rows() || it->second.cols() != t->value.cols())
      throw CheckpointError(K::config_mismatch, "checkpoint tensor " + t->name + " has the wrong shape");
    t->value = it->second;
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const SeqModel<float>& model) {
  try {
    data::write_file_bytes(path, encode_checkpoint(model));
  } catch (const data::DatasetError& e) {
    throw CheckpointError(CheckpointErrorKind::io, e.what());
  }
}

SeqModel<float> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = data::read_file_bytes(path);
  } catch (const data::DatasetError& e) {
    throw CheckpointError(CheckpointErrorKind::io, e.what());
  }
  return decode_checkpoint(bytes, expected);
}

}  // namespace uwdt::nn
