#pragma once

// File formats:
//   images      8-bit PNG, grayscale or RGB (RGBA/palette inputs are converted)
//   masks       PGM P5, 0 = masked, 255 = visible
//   seg maps    PGM P5 with the class index as pixel value (num_classes <= 256),
//               otherwise "SEG1" raw: 16-byte header (magic, u32 H, u32 W,
//               u32 num_classes, little endian) then H*W little-endian u16.
//   cert maps   PGM P5, 255 = certified, 0 = uncertified

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchcert/grid.hpp"

namespace patchcert::io {

namespace fs = std::filesystem;

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> read_bytes(const fs::path& path);

/// Writes to a temporary sibling, then renames over path.
void write_bytes_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const fs::path& path, const std::string& text);

std::vector<std::uint8_t> encode_png(int height, int width, int channels,
                                     std::span<const std::uint8_t> samples);
ImageGrid decode_png(std::span<const std::uint8_t> bytes);

ImageGrid read_png(const fs::path& path);
void write_png(const fs::path& path, const ImageGrid& image);
void write_png_bytes(const fs::path& path, int height, int width, int channels,
                     std::span<const std::uint8_t> samples);

std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
GrayImage read_pgm(const fs::path& path);
void write_pgm(const fs::path& path, const GrayImage& image);

MaskGrid read_mask(const fs::path& path);
void write_mask(const fs::path& path, const MaskGrid& mask);

/// Chooses PGM for num_classes <= 256 and SEG1 otherwise.
std::vector<std::uint8_t> encode_segmap(const SegMap& seg);
/// num_classes is required for PGM input (the file does not record it).
SegMap decode_segmap(std::span<const std::uint8_t> bytes, int num_classes,
                     std::optional<Label> ignore_label = std::nullopt);
SegMap read_segmap(const fs::path& path, int num_classes,
                   std::optional<Label> ignore_label = std::nullopt);
void write_segmap(const fs::path& path, const SegMap& seg);
/// File extension used by write_segmap for this map (".pgm" or ".seg").
std::string segmap_extension(const SegMap& seg);

BinaryMap read_binary_map(const fs::path& path);
void write_binary_map(const fs::path& path, const BinaryMap& map);

/// Fixed-palette RGB rendering of a segmentation; uncertified pixels (when a
/// cert map is given) are drawn black.
ImageGrid colorize(const SegMap& seg, const BinaryMap* cert = nullptr);

}  // namespace patchcert::io
