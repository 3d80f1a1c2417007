#include "patchcert/io.hpp"

#include <png.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

#include "patchcert/errors.hpp"

namespace patchcert::io {

namespace {

constexpr std::array<char, 4> kSegMagic = {'S', 'E', 'G', '1'};
constexpr std::size_t kSegHeaderSize = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

bool has_seg_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kSegHeaderSize &&
         std::equal(kSegMagic.begin(), kSegMagic.end(), bytes.begin(),
                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) {
      tok.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (tok.empty()) throw IoError("truncated PGM header");
    return tok;
  }

  int number() {
    const std::string tok = token();
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size() || v < 0) throw IoError("bad PGM header value: " + tok);
      return v;
    } catch (const std::logic_error&) {
      throw IoError("bad PGM header value: " + tok);
    }
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw IoError("malformed PGM header");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::array<std::array<std::uint8_t, 3>, 20> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
    {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
    {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
    {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195},
    {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
}};

bool fits_pgm(const SegMap& seg) {
  return seg.num_classes() <= 256 && (!seg.ignore_label() || *seg.ignore_label() <= 255);
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_bytes_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                     text.size()));
}

std::vector<std::uint8_t> encode_png(int height, int width, int channels,
                                     std::span<const std::uint8_t> samples) {
  if (channels != 1 && channels != 3) throw IoError("PNG output supports 1 or 3 channels");
  if (samples.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionError("PNG sample buffer has wrong size");
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, samples.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, samples.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

ImageGrid decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> samples(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, samples.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  return ImageGrid::from_bytes(static_cast<int>(image.height), static_cast<int>(image.width),
                               channels, samples);
}

ImageGrid read_png(const fs::path& path) {
  try {
    return decode_png(read_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_png(const fs::path& path, const ImageGrid& image) {
  write_png_bytes(path, image.height(), image.width(), image.channels(), image.to_bytes());
}

void write_png_bytes(const fs::path& path, int height, int width, int channels,
                     std::span<const std::uint8_t> samples) {
  write_bytes_atomic(path, encode_png(height, width, channels, samples));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width) {
    throw DimensionError("PGM pixel buffer has wrong size");
  }
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  PgmHeaderReader reader(bytes);
  if (reader.token() != "P5") throw IoError("not a binary PGM (P5) file");
  GrayImage img;
  img.width = reader.number();
  img.height = reader.number();
  const int maxval = reader.number();
  if (img.width < 1 || img.height < 1) throw IoError("PGM has empty dimensions");
  if (maxval < 1 || maxval > 255) throw IoError("only 8-bit PGM is supported");
  const std::size_t offset = reader.raster_offset();
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() < offset + n) throw IoError("truncated PGM raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
  return img;
}

GrayImage read_pgm(const fs::path& path) {
  try {
    return decode_pgm(read_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  write_bytes_atomic(path, encode_pgm(image));
}

MaskGrid read_mask(const fs::path& path) {
  const GrayImage g = read_pgm(path);
  std::vector<std::uint8_t> bits(g.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (g.pixels[i] != 0 && g.pixels[i] != 255) {
      throw IoError(path.string() + ": mask values must be 0 or 255");
    }
    bits[i] = g.pixels[i] == 255 ? 1 : 0;
  }
  return MaskGrid(BinaryMap(g.height, g.width, std::move(bits)));
}

void write_mask(const fs::path& path, const MaskGrid& mask) {
  write_binary_map(path, mask.map());
}

std::vector<std::uint8_t> encode_segmap(const SegMap& seg) {
  if (fits_pgm(seg)) {
    GrayImage g{seg.height(), seg.width(), {}};
    g.pixels.reserve(seg.labels().size());
    for (Label l : seg.labels()) g.pixels.push_back(static_cast<std::uint8_t>(l));
    return encode_pgm(g);
  }
  std::vector<std::uint8_t> out(kSegMagic.begin(), kSegMagic.end());
  put_u32(out, static_cast<std::uint32_t>(seg.height()));
  put_u32(out, static_cast<std::uint32_t>(seg.width()));
  put_u32(out, static_cast<std::uint32_t>(seg.num_classes()));
  out.reserve(out.size() + 2 * seg.labels().size());
  for (Label l : seg.labels()) {
    out.push_back(static_cast<std::uint8_t>(l & 0xff));
    out.push_back(static_cast<std::uint8_t>(l >> 8));
  }
  return out;
}

SegMap decode_segmap(std::span<const std::uint8_t> bytes, int num_classes,
                     std::optional<Label> ignore_label) {
  if (has_seg_magic(bytes)) {
    const auto h = get_u32(bytes, 4);
    const auto w = get_u32(bytes, 8);
    const auto k = get_u32(bytes, 12);
    if (h == 0 || w == 0 || h > 1u << 15 || w > 1u << 15) {
      throw IoError("SEG1 header has invalid dimensions");
    }
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (bytes.size() != kSegHeaderSize + 2 * n) throw IoError("SEG1 payload has wrong size");
    if (num_classes > 0 && static_cast<int>(k) != num_classes) {
      throw IoError("SEG1 declares " + std::to_string(k) + " classes, expected " +
                    std::to_string(num_classes));
    }
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<Label>(bytes[kSegHeaderSize + 2 * i] |
                                     (bytes[kSegHeaderSize + 2 * i + 1] << 8));
    }
    return SegMap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(k),
                  std::move(labels), ignore_label);
  }
  if (num_classes < 1) throw IoError("PGM segmentation needs an explicit class count");
  const GrayImage g = decode_pgm(bytes);
  std::vector<Label> labels(g.pixels.begin(), g.pixels.end());
  return SegMap(g.height, g.width, num_classes, std::move(labels), ignore_label);
}

SegMap read_segmap(const fs::path& path, int num_classes, std::optional<Label> ignore_label) {
  try {
    return decode_segmap(read_bytes(path), num_classes, ignore_label);
  } catch (const patchcert::Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_segmap(const fs::path& path, const SegMap& seg) {
  write_bytes_atomic(path, encode_segmap(seg));
}

std::string segmap_extension(const SegMap& seg) {
  return fits_pgm(seg) ? ".pgm" : ".seg";
}

BinaryMap read_binary_map(const fs::path& path) {
  return read_mask(path).map();
}

void write_binary_map(const fs::path& path, const BinaryMap& map) {
  GrayImage g{map.height(), map.width(), {}};
  g.pixels.reserve(map.bits().size());
  for (auto b : map.bits()) g.pixels.push_back(b ? 255 : 0);
  write_pgm(path, g);
}

ImageGrid colorize(const SegMap& seg, const BinaryMap* cert) {
  std::vector<std::uint8_t> rgb;
  rgb.reserve(seg.labels().size() * 3);
  for (int r = 0; r < seg.height(); ++r) {
    for (int c = 0; c < seg.width(); ++c) {
      if (cert != nullptr && !cert->at(r, c)) {
        rgb.insert(rgb.end(), {0, 0, 0});
        continue;
      }
      const auto& color = kPalette[seg.at(r, c) % kPalette.size()];
      rgb.insert(rgb.end(), color.begin(), color.end());
    }
  }
  return ImageGrid::from_bytes(seg.height(), seg.width(), 3, rgb);
}

}  // namespace patchcert::io
