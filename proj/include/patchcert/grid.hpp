#pragma once

// Pixel containers shared by every stage of the pipeline: images, masks,
// segmentation maps and per-pixel binary maps. All are plain values stored
// row-major.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace patchcert {

using Label = std::uint16_t;

/// H x W x C image with intensities in [0,1].
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, int channels, float fill = 0.0f);
  ImageGrid(int height, int width, int channels, std::vector<float> data);

  /// Builds an image from 8-bit samples (value / 255).
  static ImageGrid from_bytes(int height, int width, int channels,
                              std::span<const std::uint8_t> bytes);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float at(int row, int col, int ch) const {
    return data_[index(row, col, ch)];
  }
  void set(int row, int col, int ch, float value);

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> pixel(int row, int col) const {
    return std::span<const float>(data_).subspan(index(row, col, 0),
                                                 static_cast<std::size_t>(channels_));
  }

  /// Rounded 8-bit representation, used for I/O and bit-exact comparisons.
  std::vector<std::uint8_t> to_bytes() const;

  bool same_shape(const ImageGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(ch);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Row-major boolean grid. Base for masks and certification maps.
class BinaryMap {
 public:
  BinaryMap() = default;
  BinaryMap(int height, int width, bool fill = false);
  BinaryMap(int height, int width, std::vector<std::uint8_t> bits);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool at(int row, int col) const { return bits_[index(row, col)] != 0; }
  void set(int row, int col, bool value) { bits_[index(row, col)] = value ? 1 : 0; }

  std::size_t count() const noexcept;
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const BinaryMap&, const BinaryMap&) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Visibility grid: true = pixel visible, false = masked.
class MaskGrid {
 public:
  MaskGrid() = default;
  MaskGrid(int height, int width, bool visible = true) : map_(height, width, visible) {}
  explicit MaskGrid(BinaryMap visible) : map_(std::move(visible)) {}

  int height() const noexcept { return map_.height(); }
  int width() const noexcept { return map_.width(); }
  bool visible(int row, int col) const { return map_.at(row, col); }
  void set_visible(int row, int col, bool value) { map_.set(row, col, value); }

  std::size_t visible_count() const noexcept { return map_.count(); }
  const BinaryMap& map() const noexcept { return map_; }
  MaskGrid transposed() const;

  friend bool operator==(const MaskGrid&, const MaskGrid&) = default;

 private:
  BinaryMap map_;
};

/// Per-pixel class labels. An optional ignore label marks unlabeled pixels
/// (ground truth only); it is exempt from the label < num_classes check.
class SegMap {
 public:
  SegMap() = default;
  SegMap(int height, int width, int num_classes, Label fill = 0);
  SegMap(int height, int width, int num_classes, std::vector<Label> labels,
         std::optional<Label> ignore_label = std::nullopt);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int num_classes() const noexcept { return num_classes_; }
  std::optional<Label> ignore_label() const noexcept { return ignore_label_; }

  Label at(int row, int col) const { return labels_[index(row, col)]; }
  void set(int row, int col, Label label);
  bool ignored(int row, int col) const {
    return ignore_label_ && at(row, col) == *ignore_label_;
  }

  std::span<const Label> labels() const noexcept { return labels_; }

  bool same_shape(const SegMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const SegMap&, const SegMap&) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::optional<Label> ignore_label_;
  std::vector<Label> labels_;
};

}  // namespace patchcert
