#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwdt/data/episode.hpp"

namespace uwdt::data {

// Little-endian layout:
//   "UWDTDS1\0" | u16 version | u32 episode count |
//   per episode: u16 T | u8 cause | T x u8 actions | T x f32 rewards | T x 8200 x i8 grids |
//   u32 CRC-32 of every byte between the magic and the checksum.
inline constexpr char kDatasetMagic[8] = {'U', 'W', 'D', 'T', 'D', 'S', '1', '\0'};
inline constexpr std::uint16_t kDatasetVersion = 1;

enum class DatasetErrorKind { io, bad_magic, version_mismatch, truncated, checksum_mismatch, invariant_violation };

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  DatasetErrorKind kind() const { return kind_; }

 private:
  DatasetErrorKind kind_;
};

std::vector<std::uint8_t> encode_dataset(const std::vector<Episode>& episodes);
std::vector<Episode> decode_dataset(const std::vector<std::uint8_t>& bytes);

void write_dataset(const std::filesystem::path& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_dataset(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace uwdt::data
