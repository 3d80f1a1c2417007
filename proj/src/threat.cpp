#include "patchcert/threat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchcert/errors.hpp"

namespace patchcert {

std::string to_string(const Rect& r) {
  return "(top=" + std::to_string(r.top) + ", left=" + std::to_string(r.left) +
         ", h=" + std::to_string(r.height) + ", w=" + std::to_string(r.width) + ")";
}

ThreatModel::ThreatModel(int image_height, int image_width, int patch_height,
                         int patch_width, int num_patches)
    : image_height_(image_height),
      image_width_(image_width),
      patch_height_(patch_height),
      patch_width_(patch_width),
      num_patches_(num_patches) {
  if (image_height < 1 || image_width < 1) throw GeometryError("empty image");
  if (patch_height < 1 || patch_width < 1) throw GeometryError("empty patch");
  if (patch_height > image_height || patch_width > image_width) {
    throw GeometryError("patch " + std::to_string(patch_height) + "x" +
                        std::to_string(patch_width) + " larger than image " +
                        std::to_string(image_height) + "x" + std::to_string(image_width));
  }
  if (num_patches < 1) throw GeometryError("num_patches must be >= 1");
}

std::size_t ThreatModel::location_count() const noexcept {
  return static_cast<std::size_t>(image_height_ - patch_height_ + 1) *
         static_cast<std::size_t>(image_width_ - patch_width_ + 1);
}

ThreatModel ThreatModel::transposed() const {
  return ThreatModel(image_width_, image_height_, patch_width_, patch_height_, num_patches_);
}

ThreatModel ThreatModel::with_patches(int n) const {
  return ThreatModel(image_height_, image_width_, patch_height_, patch_width_, n);
}

void check_location(const PatchLocation& loc, int image_height, int image_width) {
  if (loc.height < 1 || loc.width < 1 || loc.top < 0 || loc.left < 0 ||
      loc.bottom() > image_height || loc.right() > image_width) {
    throw GeometryError("patch location " + to_string(loc) + " outside " +
                        std::to_string(image_height) + "x" + std::to_string(image_width) +
                        " image");
  }
}

ImageGrid apply_patch(const ImageGrid& image, const ImageGrid& content,
                      const PatchLocation& loc) {
  if (!image.same_shape(content)) {
    throw DimensionError("patch content must have the image shape");
  }
  check_location(loc, image.height(), image.width());
  ImageGrid out = image;
  for (int r = loc.top; r < loc.bottom(); ++r)
    for (int c = loc.left; c < loc.right(); ++c)
      for (int ch = 0; ch < image.channels(); ++ch) out.set(r, c, ch, content.at(r, c, ch));
  return out;
}

ImageGrid paste_patch(const ImageGrid& image, const ImageGrid& patch,
                      const PatchLocation& loc) {
  if (patch.height() != loc.height || patch.width() != loc.width ||
      patch.channels() != image.channels()) {
    throw DimensionError("patch pixels do not match location " + to_string(loc));
  }
  check_location(loc, image.height(), image.width());
  ImageGrid out = image;
  for (int r = 0; r < loc.height; ++r)
    for (int c = 0; c < loc.width; ++c)
      for (int ch = 0; ch < image.channels(); ++ch)
        out.set(loc.top + r, loc.left + c, ch, patch.at(r, c, ch));
  return out;
}

MaskedImage apply_mask(const ImageGrid& image, const MaskGrid& mask) {
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw DimensionError("mask " + std::to_string(mask.height()) + "x" +
                         std::to_string(mask.width()) + " does not match image " +
                         std::to_string(image.height()) + "x" +
                         std::to_string(image.width()));
  }
  ImageGrid pixels(image.height(), image.width(), image.channels());
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      if (mask.visible(r, c))
        for (int ch = 0; ch < image.channels(); ++ch) pixels.set(r, c, ch, image.at(r, c, ch));
  return MaskedImage{std::move(pixels), mask};
}

bool covers(const MaskGrid& mask, const PatchLocation& loc) {
  check_location(loc, mask.height(), mask.width());
  for (int r = loc.top; r < loc.bottom(); ++r)
    for (int c = loc.left; c < loc.right(); ++c)
      if (mask.visible(r, c)) return false;
  return true;
}

int square_patch_side(double fraction, int image_height, int image_width) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw GeometryError("patch fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const double area = fraction * static_cast<double>(image_height) * image_width;
  // The tolerance keeps exact squares (0.01 of 100x100 -> 10) from rounding up
  // on floating-point noise.
  const int side = static_cast<int>(std::ceil(std::sqrt(area) - 1e-9));
  if (side > std::min(image_height, image_width)) {
    throw GeometryError("a square patch of side " + std::to_string(side) +
                        " does not fit the image");
  }
  return std::max(side, 1);
}

std::vector<PatchLocation> enumerate_locations(const ThreatModel& tm) {
  std::vector<PatchLocation> out;
  out.reserve(tm.location_count());
  for (int top = 0; top + tm.patch_height() <= tm.image_height(); ++top)
    for (int left = 0; left + tm.patch_width() <= tm.image_width(); ++left)
      out.push_back({top, left, tm.patch_height(), tm.patch_width()});
  return out;
}

}  // namespace patchcert
