#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwdt/nn/seq_model.hpp"

namespace uwdt::nn {

// Little-endian layout:
//   "UWDTCK1\0" | u16 version | u32 n + n bytes config JSON | u32 tensor count |
//   per tensor: u16 n + n bytes name | u32 rows | u32 cols | rows*cols x f32 |
//   u32 CRC-32 of every byte between the magic and the checksum.
// Tensors are the trainable parameters followed by the batch-norm buffers.
inline constexpr char kCheckpointMagic[8] = {'U', 'W', 'D', 'T', 'C', 'K', '1', '\0'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class CheckpointErrorKind { io, bad_magic, version_mismatch, truncated, checksum_mismatch, config_mismatch };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
// Missing keys keep their defaults; throws std::invalid_argument on bad values.
ModelConfig model_config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> encode_checkpoint(const SeqModel<float>& model);
// When `expected` is given, a different stored config is a config_mismatch.
SeqModel<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                  const std::optional<ModelConfig>& expected = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const SeqModel<float>& model);
SeqModel<float> load_checkpoint(const std::filesystem::path& path,
                                const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace uwdt::nn
