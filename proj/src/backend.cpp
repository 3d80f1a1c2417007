#include "patchcert/backend.hpp"

#include <limits>

#include "patchcert/errors.hpp"

namespace patchcert {

namespace {

template <typename Fn>
auto with_mask_index(int index, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const BackendError& e) {
    if (e.mask_index()) throw;
    throw BackendError("mask " + std::to_string(index) + ": " + e.what(), e.request_id(),
                       index);
  } catch (const Error& e) {
    throw BackendError("mask " + std::to_string(index) + ": " + e.what(), std::nullopt, index);
  }
}

// Candidate source pixel for nearest fill, ordered by (distance, row, col).
struct Candidate {
  long dist = std::numeric_limits<long>::max();
  int row = 0;
  int col = 0;

  bool better_than(const Candidate& o) const {
    if (dist != o.dist) return dist < o.dist;
    if (row != o.row) return row < o.row;
    return col < o.col;
  }
};

}  // namespace

std::vector<ImageGrid> DemaskingBackend::demask_batch(std::span<const MaskedImage> inputs) const {
  std::vector<ImageGrid> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out.push_back(with_mask_index(static_cast<int>(i), [&] { return demask(inputs[i]); }));
  }
  return out;
}

std::vector<SegMap> SegmentationBackend::segment_batch(std::span<const ImageGrid> inputs) const {
  std::vector<SegMap> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out.push_back(with_mask_index(static_cast<int>(i), [&] { return segment(inputs[i]); }));
  }
  return out;
}

void SegSet::validate() const {
  for (const auto& s : entries) {
    if (!s.same_shape(entries.front()) || s.num_classes() != entries.front().num_classes()) {
      throw DimensionError("segmentation set entries disagree in shape or class count");
    }
  }
}

SegSet build_segmentation_set(const ImageGrid& image, const MaskSet& ms,
                              const DemaskingBackend& demasker,
                              const SegmentationBackend& segmenter) {
  std::vector<MaskedImage> masked;
  masked.reserve(ms.masks.size());
  for (const auto& m : ms.masks) masked.push_back(apply_mask(image, m));

  std::vector<ImageGrid> restored = demasker.demask_batch(masked);
  if (restored.size() != masked.size()) {
    throw BackendError("demasker returned " + std::to_string(restored.size()) +
                       " images for " + std::to_string(masked.size()) + " masks");
  }
  for (std::size_t k = 0; k < restored.size(); ++k) {
    if (!restored[k].same_shape(image)) {
      throw BackendDimensionError("mask " + std::to_string(k) +
                                      ": demasked image has the wrong shape",
                                  std::nullopt, static_cast<int>(k));
    }
  }

  SegSet set{segmenter.segment_batch(restored)};
  if (set.entries.size() != restored.size()) {
    throw BackendError("segmenter returned the wrong number of maps");
  }
  for (std::size_t k = 0; k < set.entries.size(); ++k) {
    const auto& s = set.entries[k];
    if (s.height() != image.height() || s.width() != image.width() ||
        s.num_classes() != segmenter.num_classes()) {
      throw BackendDimensionError("mask " + std::to_string(k) +
                                      ": segmentation has the wrong shape or class count",
                                  std::nullopt, static_cast<int>(k));
    }
  }
  return set;
}

ImageGrid NearestFillDemasker::demask(const MaskedImage& masked) const {
  const auto& mask = masked.mask;
  const auto& src = masked.pixels;
  if (src.height() != mask.height() || src.width() != mask.width()) {
    throw DimensionError("masked image and mask disagree in size");
  }
  const int h = src.height();
  const int w = src.width();
  const int ch = src.channels();
  if (mask.visible_count() == 0) return ImageGrid(h, w, ch, 0.5f);

  // Per column, the nearest visible row at or above / at or below each row.
  std::vector<int> above(static_cast<std::size_t>(h) * w);
  std::vector<int> below(static_cast<std::size_t>(h) * w);
  const auto cell = [w](int r, int c) {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c);
  };
  for (int c = 0; c < w; ++c) {
    int last = -1;
    for (int r = 0; r < h; ++r) {
      if (mask.visible(r, c)) last = r;
      above[cell(r, c)] = last;
    }
    last = -1;
    for (int r = h - 1; r >= 0; --r) {
      if (mask.visible(r, c)) last = r;
      below[cell(r, c)] = last;
    }
  }

  std::vector<float> out(src.data().begin(), src.data().end());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (mask.visible(i, j)) continue;
      Candidate best;
      for (int dc = 0; dc < w; ++dc) {
        const long dh = static_cast<long>(dc) * dc;
        if (dh > best.dist) break;
        for (int c : {j - dc, j + dc}) {
          if (c < 0 || c >= w || (dc == 0 && c != j)) continue;
          for (int r : {above[cell(i, c)], below[cell(i, c)]}) {
            if (r < 0) continue;
            const Candidate cand{dh + static_cast<long>(r - i) * (r - i), r, c};
            if (cand.better_than(best)) best = cand;
          }
        }
      }
      const auto px = src.pixel(best.row, best.col);
      std::copy(px.begin(), px.end(),
                out.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(i) * w + j) * ch));
    }
  }
  return ImageGrid(h, w, ch, std::move(out));
}

SegMap DominantChannelSegmenter::segment(const ImageGrid& image) const {
  if (image.channels() != 3) {
    throw Error("dominant-channel segmenter needs an RGB image, got " +
                std::to_string(image.channels()) + " channels");
  }
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(image.height()) * image.width());
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      const auto px = image.pixel(r, c);
      Label best = 0;
      for (Label k = 1; k < 3; ++k)
        if (px[k] > px[best]) best = k;
      labels.push_back(best);
    }
  }
  return SegMap(image.height(), image.width(), 3, std::move(labels));
}

ConstantSegmenter::ConstantSegmenter(int num_classes, Label label)
    : num_classes_(num_classes), label_(label) {
  if (label >= num_classes) throw Error("constant label out of range");
}

SegMap ConstantSegmenter::segment(const ImageGrid& image) const {
  return SegMap(image.height(), image.width(), num_classes_, label_);
}

std::string ConstantSegmenter::fingerprint() const {
  return "toy-constant/1:" + std::to_string(num_classes_) + ":" + std::to_string(label_);
}

SegMap ThresholdSegmenter::segment(const ImageGrid& image) const {
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(image.height()) * image.width());
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      float sum = 0.0f;
      for (float v : image.pixel(r, c)) sum += v;
      labels.push_back(sum / static_cast<float>(image.channels()) > threshold_ ? 1 : 0);
    }
  }
  return SegMap(image.height(), image.width(), 2, std::move(labels));
}

std::string ThresholdSegmenter::fingerprint() const {
  return "toy-threshold/1:" + std::to_string(threshold_);
}

std::unique_ptr<DemaskingBackend> toy_nearest_fill_demasker() {
  return std::make_unique<NearestFillDemasker>();
}

std::unique_ptr<SegmentationBackend> toy_oracle_segmenter() {
  return std::make_unique<DominantChannelSegmenter>();
}

}  // namespace patchcert
