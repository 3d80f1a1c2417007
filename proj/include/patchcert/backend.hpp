#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "patchcert/grid.hpp"
#include "patchcert/maskgen.hpp"
#include "patchcert/threat.hpp"

namespace patchcert {

/// Reconstructs masked pixels. Implementations must be a function of the
/// visible pixels and the mask only; the zero fill under masked pixels is
/// not content.
class DemaskingBackend {
 public:
  virtual ~DemaskingBackend() = default;

  virtual ImageGrid demask(const MaskedImage& masked) const = 0;
  virtual std::vector<ImageGrid> demask_batch(std::span<const MaskedImage> inputs) const;
  virtual bool deterministic() const { return true; }
  virtual std::string fingerprint() const = 0;
};

class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;

  virtual SegMap segment(const ImageGrid& image) const = 0;
  virtual std::vector<SegMap> segment_batch(std::span<const ImageGrid> inputs) const;
  virtual int num_classes() const = 0;
  virtual bool deterministic() const { return true; }
  virtual std::string fingerprint() const = 0;
};

/// S[k] = f(g(x masked by M[k])), ordered like the mask set.
struct SegSet {
  std::vector<SegMap> entries;

  int size() const noexcept { return static_cast<int>(entries.size()); }
  /// Throws unless all entries share shape and class count.
  void validate() const;
};

SegSet build_segmentation_set(const ImageGrid& image, const MaskSet& ms,
                              const DemaskingBackend& demasker,
                              const SegmentationBackend& segmenter);

/// Fills each masked pixel with the nearest visible pixel (Euclidean
/// distance, ties to the row-major first candidate). A fully masked input
/// becomes mid-gray.
class NearestFillDemasker final : public DemaskingBackend {
 public:
  ImageGrid demask(const MaskedImage& masked) const override;
  std::string fingerprint() const override { return "toy-nearest-fill/1"; }
};

/// Returns the zero-filled buffer unchanged.
class IdentityDemasker final : public DemaskingBackend {
 public:
  ImageGrid demask(const MaskedImage& masked) const override { return masked.pixels; }
  std::string fingerprint() const override { return "toy-identity/1"; }
};

/// Per-pixel dominant channel of an RGB image: red -> 0, green -> 1,
/// blue -> 2, ties to the lower channel.
class DominantChannelSegmenter final : public SegmentationBackend {
 public:
  SegMap segment(const ImageGrid& image) const override;
  int num_classes() const override { return 3; }
  std::string fingerprint() const override { return "toy-dominant-channel/1"; }
};

class ConstantSegmenter final : public SegmentationBackend {
 public:
  ConstantSegmenter(int num_classes, Label label);
  SegMap segment(const ImageGrid& image) const override;
  int num_classes() const override { return num_classes_; }
  std::string fingerprint() const override;

 private:
  int num_classes_;
  Label label_;
};

/// Binary segmenter: class 1 where the mean channel intensity exceeds the
/// threshold, else 0.
class ThresholdSegmenter final : public SegmentationBackend {
 public:
  explicit ThresholdSegmenter(float threshold = 0.5f) : threshold_(threshold) {}
  SegMap segment(const ImageGrid& image) const override;
  int num_classes() const override { return 2; }
  std::string fingerprint() const override;

 private:
  float threshold_;
};

std::unique_ptr<DemaskingBackend> toy_nearest_fill_demasker();
std::unique_ptr<SegmentationBackend> toy_oracle_segmenter();

}  // namespace patchcert
