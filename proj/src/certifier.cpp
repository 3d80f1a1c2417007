#include "patchcert/certifier.hpp"

#include <algorithm>

#include "patchcert/errors.hpp"

namespace patchcert {

std::string to_string(CertMode mode) {
  return mode == CertMode::recovery ? "recovery" : "detection";
}

double CertifiedOutput::certified_fraction() const {
  const auto total = static_cast<double>(cert_map.height()) * cert_map.width();
  return total > 0 ? static_cast<double>(cert_map.count()) / total : 0.0;
}

int min_recovery_masks(int strength, int num_patches) {
  return 2 * num_patches * strength + 1;
}

void check_recovery_condition(int num_masks, int strength, int num_patches) {
  if (num_masks < 1 || strength < 1 || num_patches < 1) {
    throw Error("K, T and N must all be at least 1");
  }
  const int required = min_recovery_masks(strength, num_patches);
  if (num_masks < required) {
    throw InsufficientMasksError("recovery with T=" + std::to_string(strength) + " and N=" +
                                     std::to_string(num_patches) + " needs K >= " +
                                     std::to_string(required) + ", got K=" +
                                     std::to_string(num_masks),
                                 required);
  }
}

CertifiedOutput recovery_vote(const SegSet& segset) {
  if (segset.entries.empty()) throw Error("cannot vote over an empty segmentation set");
  segset.validate();
  const auto& first = segset.entries.front();
  const int h = first.height();
  const int w = first.width();
  const int classes = first.num_classes();

  CertifiedOutput out{SegMap(h, w, classes), BinaryMap(h, w), CertMode::recovery, {}};
  out.meta.num_masks = segset.size();
  std::vector<int> tally(static_cast<std::size_t>(classes), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::fill(tally.begin(), tally.end(), 0);
      for (const auto& s : segset.entries) ++tally[s.at(r, c)];
      // max_element returns the first maximum, i.e. the smallest class index.
      const auto winner = std::max_element(tally.begin(), tally.end());
      out.segmentation.set(r, c, static_cast<Label>(winner - tally.begin()));
      out.cert_map.set(r, c, *winner == segset.size());
    }
  }
  return out;
}

CertifiedOutput detection_verify(const SegMap& base, const SegSet& segset) {
  segset.validate();
  for (const auto& s : segset.entries) {
    if (!s.same_shape(base) || s.num_classes() != base.num_classes()) {
      throw DimensionError("segmentation set does not match the base segmentation");
    }
  }
  CertifiedOutput out{base, BinaryMap(base.height(), base.width()), CertMode::detection, {}};
  out.meta.num_masks = segset.size();
  for (int r = 0; r < base.height(); ++r) {
    for (int c = 0; c < base.width(); ++c) {
      const Label label = base.at(r, c);
      out.cert_map.set(r, c, std::all_of(segset.entries.begin(), segset.entries.end(),
                                         [&](const SegMap& s) { return s.at(r, c) == label; }));
    }
  }
  return out;
}

int verified_strength(const MaskSet& ms) {
  if (ms.kind != MaskSetKind::recovery) throw Error("not a recovery mask set");
  const int computed = compute_strength(ms, ms.threat);
  const int declared = ms.declared_strength.value_or(computed);
  if (computed > declared) {
    throw VerificationError("mask set '" + ms.scheme + "' declares T=" +
                            std::to_string(declared) + " but a patch affects " +
                            std::to_string(computed) + " masks");
  }
  return std::max(declared, 1);
}

CertifiedOutput certify_recovery(const ImageGrid& image, const MaskSet& ms,
                                 const DemaskingBackend& demasker,
                                 const SegmentationBackend& segmenter, int num_patches) {
  if (ms.kind != MaskSetKind::recovery) {
    throw Error("recovery certification needs a recovery mask set");
  }
  const int strength = verified_strength(ms);
  check_recovery_condition(ms.size(), strength, num_patches);
  CertifiedOutput out = recovery_vote(build_segmentation_set(image, ms, demasker, segmenter));
  out.meta = CertMeta{ms.size(), strength, num_patches, ms.scheme};
  return out;
}

CertifiedOutput certify_detection(const ImageGrid& image, const MaskSet& ms,
                                  const DemaskingBackend& demasker,
                                  const SegmentationBackend& segmenter,
                                  DetectionOptions options) {
  if (ms.kind != MaskSetKind::detection) {
    throw Error("detection certification needs a detection mask set");
  }
  if (auto loc = find_uncovered_location(ms, ms.threat)) {
    throw VerificationError("detection mask set leaves location " + to_string(*loc) +
                            " uncovered");
  }
  if (!options.allow_nondeterministic &&
      (!demasker.deterministic() || !segmenter.deterministic())) {
    throw BackendError("detection requires deterministic backends (override to force)");
  }
  const SegMap base = segmenter.segment(image);
  if (base.height() != image.height() || base.width() != image.width() ||
      base.num_classes() != segmenter.num_classes()) {
    throw BackendDimensionError("segmentation of the clean image has the wrong shape");
  }
  CertifiedOutput out =
      detection_verify(base, build_segmentation_set(image, ms, demasker, segmenter));
  out.meta = CertMeta{ms.size(), 0, 1, ms.scheme};
  return out;
}

}  // namespace patchcert
