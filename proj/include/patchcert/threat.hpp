#pragma once

// Patch threat model: rectangular patch locations, the patch operator
// A(x, p, l) = (1 - l) * x + l * p, masking, and the covering predicate.

#include <string>
#include <vector>

#include "patchcert/grid.hpp"

namespace patchcert {

/// Axis-aligned pixel rectangle. Used for patch locations and blocks.
struct Rect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  int bottom() const noexcept { return top + height; }  // exclusive
  int right() const noexcept { return left + width; }   // exclusive
  bool contains(int row, int col) const noexcept {
    return row >= top && row < bottom() && col >= left && col < right();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
  friend auto operator<=>(const Rect&, const Rect&) = default;
};

using PatchLocation = Rect;

std::string to_string(const Rect& r);

class ThreatModel {
 public:
  ThreatModel(int image_height, int image_width, int patch_height, int patch_width,
              int num_patches = 1);

  int image_height() const noexcept { return image_height_; }
  int image_width() const noexcept { return image_width_; }
  int patch_height() const noexcept { return patch_height_; }
  int patch_width() const noexcept { return patch_width_; }
  int num_patches() const noexcept { return num_patches_; }

  /// |L| = (H - H' + 1) * (W - W' + 1)
  std::size_t location_count() const noexcept;
  ThreatModel transposed() const;
  ThreatModel with_patches(int n) const;

  friend bool operator==(const ThreatModel&, const ThreatModel&) = default;

 private:
  int image_height_;
  int image_width_;
  int patch_height_;
  int patch_width_;
  int num_patches_;
};

/// Zero-filled pixel buffer paired with its visibility mask. The mask, not
/// the zero fill, carries the meaning of "hidden".
struct MaskedImage {
  ImageGrid pixels;
  MaskGrid mask;
};

/// Validates that loc lies inside an image of the given size.
void check_location(const PatchLocation& loc, int image_height, int image_width);

/// Returns image with the loc rectangle replaced by the same rectangle of
/// content (content has the full image shape).
ImageGrid apply_patch(const ImageGrid& image, const ImageGrid& content,
                      const PatchLocation& loc);

/// Same as apply_patch, but patch holds only loc.height x loc.width pixels.
ImageGrid paste_patch(const ImageGrid& image, const ImageGrid& patch,
                      const PatchLocation& loc);

MaskedImage apply_mask(const ImageGrid& image, const MaskGrid& mask);

/// True iff every pixel of loc is masked in mask.
bool covers(const MaskGrid& mask, const PatchLocation& loc);

/// Side of the square patch covering the given fraction of an H x W image,
/// rounded up: ceil(sqrt(fraction * H * W)).
int square_patch_side(double fraction, int image_height, int image_width);

/// All placements of an H' x W' rectangle, row-major by (top, left).
std::vector<PatchLocation> enumerate_locations(const ThreatModel& tm);

}  // namespace patchcert
