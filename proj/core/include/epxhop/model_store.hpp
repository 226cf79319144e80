#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epxhop/pipeline.hpp"

namespace epxhop {

// Container layout, all integers little-endian:
//   magic "EPXHOP01"
//   u32 chunk count
//   per chunk: u32 kind, u64 offset, u64 length, u32 CRC-32 of the payload
//   u32 CRC-32 of the chunk count and directory
//   payloads, back to back, in directory order
inline constexpr std::string_view kContainerMagic = "EPXHOP01";

enum class ChunkKind : std::uint32_t {
  bundle_info = 1,  // starts a stage-1 or pair bundle
  color_pca = 2,
  cascade = 3,
  sls = 4,
  meta = 5,
  config = 6,  // run configuration text
};

std::string_view chunk_name(ChunkKind kind);

struct Chunk {
  ChunkKind kind = ChunkKind::bundle_info;
  std::vector<std::uint8_t> payload;
};

struct ManifestEntry {
  ChunkKind kind = ChunkKind::bundle_info;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint32_t crc = 0;
};

std::vector<std::uint8_t> encode_container(std::span<const Chunk> chunks);

// Throws Errc::bad_magic, Errc::bad_version, Errc::checksum_mismatch (naming
// the chunk) or Errc::unknown_chunk.
std::vector<ManifestEntry> read_manifest(std::span<const std::uint8_t> bytes);
std::vector<Chunk> decode_container(std::span<const std::uint8_t> bytes);

// A stage-1 model and/or any number of pair models.
struct ModelFile {
  std::optional<Stage1Model> stage1;
  std::vector<PairModel> pairs;
  std::optional<std::string> config_text;
};

std::vector<std::uint8_t> encode_model_file(const ModelFile& file);
ModelFile decode_model_file(std::span<const std::uint8_t> bytes);

// Writes to a temporary sibling and renames it into place.
void save_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model_file(const std::filesystem::path& path);

}  // namespace epxhop
