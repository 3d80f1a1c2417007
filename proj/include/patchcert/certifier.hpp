#pragma once

// Pixel-wise certification.
//
// Recovery: the output label is the majority vote over the K demasked
// segmentations (ties to the smaller class index). A pixel is certified when
// all K votes agree and K >= 2*N*T + 1; then no N patches can change it.
//
// Detection: the output is f(x) itself. A pixel is verified when f(x) agrees
// with every demasked segmentation; a patched input that still verifies at a
// pixel keeps the clean label there.

#include <string>

#include "patchcert/backend.hpp"
#include "patchcert/grid.hpp"
#include "patchcert/maskgen.hpp"

namespace patchcert {

enum class CertMode { recovery, detection };

std::string to_string(CertMode mode);

struct CertMeta {
  int num_masks = 0;
  int strength = 0;  // 0 for detection
  int num_patches = 1;
  std::string scheme;
};

struct CertifiedOutput {
  SegMap segmentation;
  BinaryMap cert_map;
  CertMode mode = CertMode::recovery;
  CertMeta meta;

  double certified_fraction() const;
};

/// Throws InsufficientMasksError unless K >= 2*N*T + 1.
void check_recovery_condition(int num_masks, int strength, int num_patches);
int min_recovery_masks(int strength, int num_patches);

CertifiedOutput recovery_vote(const SegSet& segset);
CertifiedOutput detection_verify(const SegMap& base, const SegSet& segset);

/// Strength used for the K condition: the declared strength, after checking
/// the masks really achieve it.
int verified_strength(const MaskSet& ms);

CertifiedOutput certify_recovery(const ImageGrid& image, const MaskSet& ms,
                                 const DemaskingBackend& demasker,
                                 const SegmentationBackend& segmenter, int num_patches = 1);

struct DetectionOptions {
  bool allow_nondeterministic = false;
};

CertifiedOutput certify_detection(const ImageGrid& image, const MaskSet& ms,
                                  const DemaskingBackend& demasker,
                                  const SegmentationBackend& segmenter,
                                  DetectionOptions options = {});

}  // namespace patchcert
