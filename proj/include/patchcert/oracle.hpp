#pragma once

// Brute-force validators for issued certificates. These recompute
// everything from scratch for every patch placement and content in a
// battery; nothing here relies on the covering argument they check.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "patchcert/backend.hpp"
#include "patchcert/certifier.hpp"
#include "patchcert/maskgen.hpp"
#include "patchcert/scenes.hpp"

namespace patchcert::oracle {

/// Patch contents: index 0 is all zeros, 1 is all ones, the rest are
/// seeded random 8-bit contents.
class PatchBattery {
 public:
  explicit PatchBattery(int random_count = 100, std::uint64_t seed = 0);

  int size() const noexcept { return random_count_ + 2; }
  int random_count() const noexcept { return random_count_; }
  /// Content for one patch; salt distinguishes patches in multi-patch
  /// placements.
  ImageGrid content(int index, int height, int width, int channels,
                    std::uint64_t salt = 0) const;

 private:
  int random_count_;
  std::uint64_t seed_;
};

struct ErasureViolation {
  PatchLocation location;
  int mask_index = 0;
  int content_index = 0;
};

struct ErasureReport {
  std::string scheme;
  std::size_t locations = 0;
  int masks = 0;
  int battery_size = 0;
  std::size_t checks = 0;
  std::vector<ErasureViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// For every location and every mask that covers it, checks bit-exactly
/// (8-bit) that the masked patched image equals the masked clean image.
ErasureReport audit_masking_erasure(const ImageGrid& image, const MaskSet& ms,
                                    const ThreatModel& tm, const PatchBattery& battery);

using Placement = std::vector<PatchLocation>;

struct SoundnessViolation {
  Placement placement;
  int content_index = 0;
  int row = 0;
  int col = 0;
  Label expected = 0;
  Label observed = 0;
};

struct SoundnessReport {
  CertMode mode = CertMode::recovery;
  std::string scheme;
  int num_patches = 1;
  std::size_t placements = 0;
  int battery_size = 0;
  std::size_t patched_inputs = 0;
  std::size_t certified_pixels = 0;
  std::size_t pixel_checks = 0;
  std::vector<SoundnessViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

struct AuditSetup {
  const MaskSet& masks;
  const DemaskingBackend& demasker;
  const SegmentationBackend& segmenter;
  int num_patches = 1;
  /// Random two-patch pairs on top of the corner and adjacent pairs.
  std::size_t two_patch_samples = 200;
  std::uint64_t seed = 0;
};

/// Single-patch: all locations. Two patches: corner pairs, adjacent pairs on
/// a patch-sized grid, and seeded random pairs. Deterministic.
std::vector<Placement> patch_placements(const ThreatModel& tm, int num_patches,
                                        std::size_t random_pairs, std::uint64_t seed);

/// Certifies x, then checks that h(x') keeps the label of x at every
/// certified pixel for every placement and battery content.
SoundnessReport audit_recovery_soundness(const ImageGrid& image, const AuditSetup& setup,
                                         const PatchBattery& battery);

/// Checks that wherever v(x) = 1 and v(x') = 1, f(x') = f(x).
SoundnessReport audit_detection_soundness(const ImageGrid& image, const AuditSetup& setup,
                                          const PatchBattery& battery);

using SegmentFn = std::function<SegMap(const ImageGrid&)>;

struct AttackResult {
  PatchLocation location;
  ImageGrid patch;
  double clean_quality = 0.0;
  double quality = 0.0;  // global accuracy of the attacked prediction
  int trials = 0;
};

/// Gradient-free search minimizing global accuracy against gt: a grid of
/// locations with saturated contents, then seeded random trials.
AttackResult attack_search(const ImageGrid& image, const SegMap& gt, const SegmentFn& model,
                           const ThreatModel& tm, int budget, std::uint64_t seed);

}  // namespace patchcert::oracle
