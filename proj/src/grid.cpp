#include "patchcert/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "patchcert/errors.hpp"

namespace patchcert {

namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw GeometryError("grid dimensions must be positive, got " + std::to_string(height) +
                        "x" + std::to_string(width));
  }
}

std::size_t cells(int height, int width, int channels = 1) {
  return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
         static_cast<std::size_t>(channels);
}

void check_intensity(float v) {
  if (!(v >= 0.0f && v <= 1.0f)) {
    throw Error("pixel intensity outside [0,1]: " + std::to_string(v));
  }
}

}  // namespace

ImageGrid::ImageGrid(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width);
  if (channels < 1) throw GeometryError("image needs at least one channel");
  check_intensity(fill);
  data_.assign(cells(height, width, channels), fill);
}

ImageGrid::ImageGrid(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width);
  if (channels < 1) throw GeometryError("image needs at least one channel");
  if (data_.size() != cells(height, width, channels)) {
    throw DimensionError("image buffer holds " + std::to_string(data_.size()) +
                         " samples, expected " +
                         std::to_string(cells(height, width, channels)));
  }
  std::for_each(data_.begin(), data_.end(), check_intensity);
}

ImageGrid ImageGrid::from_bytes(int height, int width, int channels,
                                std::span<const std::uint8_t> bytes) {
  std::vector<float> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
  return ImageGrid(height, width, channels, std::move(data));
}

void ImageGrid::set(int row, int col, int ch, float value) {
  check_intensity(value);
  data_[index(row, col, ch)] = value;
}

std::vector<std::uint8_t> ImageGrid::to_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  std::transform(data_.begin(), data_.end(), out.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(v * 255.0f));
  });
  return out;
}

BinaryMap::BinaryMap(int height, int width, bool fill) : height_(height), width_(width) {
  check_dims(height, width);
  bits_.assign(cells(height, width), fill ? 1 : 0);
}

BinaryMap::BinaryMap(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  check_dims(height, width);
  if (bits_.size() != cells(height, width)) {
    throw DimensionError("binary map buffer has wrong size");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMap::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

MaskGrid MaskGrid::transposed() const {
  MaskGrid out(width(), height());
  for (int r = 0; r < height(); ++r)
    for (int c = 0; c < width(); ++c) out.set_visible(c, r, visible(r, c));
  return out;
}

SegMap::SegMap(int height, int width, int num_classes, Label fill)
    : SegMap(height, width, num_classes, std::vector<Label>(cells(height, width), fill)) {}

SegMap::SegMap(int height, int width, int num_classes, std::vector<Label> labels,
               std::optional<Label> ignore_label)
    : height_(height),
      width_(width),
      num_classes_(num_classes),
      ignore_label_(ignore_label),
      labels_(std::move(labels)) {
  check_dims(height, width);
  if (num_classes < 1 || num_classes > 65535) {
    throw Error("num_classes must be in [1, 65535], got " + std::to_string(num_classes));
  }
  if (labels_.size() != cells(height, width)) {
    throw DimensionError("segmentation buffer has wrong size");
  }
  for (Label l : labels_) {
    if (l >= num_classes_ && !(ignore_label_ && l == *ignore_label_)) {
      throw Error("label " + std::to_string(l) + " out of range for " +
                  std::to_string(num_classes_) + " classes");
    }
  }
}

void SegMap::set(int row, int col, Label label) {
  if (label >= num_classes_ && !(ignore_label_ && label == *ignore_label_)) {
    throw Error("label " + std::to_string(label) + " out of range");
  }
  labels_[index(row, col)] = label;
}

}  // namespace patchcert
