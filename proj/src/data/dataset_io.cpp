#include "uwdt/data/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "uwdt/common/bytes.hpp"

namespace uwdt::data {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(DatasetErrorKind::io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError(DatasetErrorKind::io, "write failed for " + path.string());
}

std::vector<std::uint8_t> encode_dataset(const std::vector<Episode>& episodes) {
  ByteWriter w;
  w.put_bytes(kDatasetMagic, sizeof(kDatasetMagic));
  w.put<std::uint16_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(episodes.size()));
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    try {
      ep.validate();
    } catch (const std::invalid_argument& e) {
      throw DatasetError(DatasetErrorKind::invariant_violation, "episode " + std::to_string(i) + ": " + e.what());
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(ep.steps()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(ep.cause));
    w.put_bytes(ep.actions.data(), ep.actions.size());
    w.put_bytes(ep.rewards.data(), ep.rewards.size() * sizeof(float));
    w.put_bytes(ep.grids.data(), ep.grids.size());
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc =
      crc32_of(std::span<const std::uint8_t>(bytes.data() + sizeof(kDatasetMagic), bytes.size() - sizeof(kDatasetMagic)));
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

std::vector<Episode> decode_dataset(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kDatasetMagic) || !std::equal(std::begin(kDatasetMagic), std::end(kDatasetMagic), bytes.begin()))
    throw DatasetError(DatasetErrorKind::bad_magic, "not a dataset file (bad magic)");

  ByteReader r(bytes.data(), bytes.size());
  char magic[8];
  r.get_bytes(magic, sizeof(magic));
  std::uint16_t version = 0;
  if (!r.get(version)) throw DatasetError(DatasetErrorKind::truncated, "truncated header");
  if (version != kDatasetVersion)
    throw DatasetError(DatasetErrorKind::version_mismatch, "unsupported dataset version " + std::to_string(version));
  std::uint32_t count = 0;
  if (!r.get(count)) throw DatasetError(DatasetErrorKind::truncated, "truncated header");

  std::vector<Episode> episodes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "episode " + std::to_string(i);
    std::uint16_t steps = 0;
    std::uint8_t cause = 0;
    if (!r.get(steps) || !r.get(cause)) throw DatasetError(DatasetErrorKind::truncated, where + ": truncated header");
    if (steps < 1 || steps > kMaxEpisodeSteps)
      throw DatasetError(DatasetErrorKind::invariant_violation,
                         where + ": declared length " + std::to_string(steps) + " outside [1, 22]");
    if (cause > 2) throw DatasetError(DatasetErrorKind::invariant_violation, where + ": bad terminal cause");
    Episode ep;
    ep.cause = static_cast<TerminalCause>(cause);
    ep.actions.resize(steps);
    ep.rewards.resize(steps);
    ep.grids.resize(static_cast<std::size_t>(steps) * kGridValues);
    if (!r.get_bytes(ep.actions.data(), ep.actions.size()) ||
        !r.get_bytes(ep.rewards.data(), ep.rewards.size() * sizeof(float)) ||
        !r.get_bytes(ep.grids.data(), ep.grids.size()))
      throw DatasetError(DatasetErrorKind::truncated, where + ": truncated payload");
    try {
      ep.validate();
    } catch (const std::invalid_argument& e) {
      throw DatasetError(DatasetErrorKind::invariant_violation, where + ": " + e.what());
    }
    episodes.push_back(std::move(ep));
  }
  const std::size_t payload_end = r.position();
  std::uint32_t stored = 0;
  if (!r.get(stored)) throw DatasetError(DatasetErrorKind::truncated, "missing checksum");
  if (r.remaining() != 0) throw DatasetError(DatasetErrorKind::invariant_violation, "trailing bytes after checksum");
  const std::uint32_t actual =
      crc32_of(std::span<const std::uint8_t>(bytes.data() + sizeof(kDatasetMagic), payload_end - sizeof(kDatasetMagic)));
  if (actual != stored) throw DatasetError(DatasetErrorKind::checksum_mismatch, "dataset checksum mismatch");
  return episodes;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
  write_file_bytes(path, encode_dataset(episodes));
}

std::vector<Episode> read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace uwdt::data
