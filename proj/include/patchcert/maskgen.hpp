#pragma once

// Recovery and detection mask sets.
//
// Recovery sets partition the image into patch-sized blocks; every block is
// visible in exactly one mask. The strength T of a set is the largest number
// of masks a single patch placement can leave uncovered.
//
// Detection sets hide full-height (or full-width) stripes such that every
// patch placement is covered by at least one mask.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patchcert/grid.hpp"
#include "patchcert/threat.hpp"

namespace patchcert {

/// Tiling of the image into block_height x block_width blocks; the last
/// block row/column is truncated at the image border.
class BlockPartition {
 public:
  BlockPartition(int image_height, int image_width, int block_height, int block_width);
  /// Blocks of exactly the patch size.
  static BlockPartition for_threat(const ThreatModel& tm);

  int image_height() const noexcept { return image_height_; }
  int image_width() const noexcept { return image_width_; }
  int block_height() const noexcept { return block_height_; }
  int block_width() const noexcept { return block_width_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int block_count() const noexcept { return rows_ * cols_; }

  /// Pixel rectangle of block (q, r), 0-based.
  Rect block(int q, int r) const;
  ThreatModel threat() const;
  BlockPartition transposed() const;

  friend bool operator==(const BlockPartition&, const BlockPartition&) = default;

 private:
  int image_height_;
  int image_width_;
  int block_height_;
  int block_width_;
  int rows_;
  int cols_;
};

enum class MaskSetKind { recovery, detection };

std::string to_string(MaskSetKind kind);

struct MaskSet {
  MaskSetKind kind = MaskSetKind::recovery;
  std::string scheme;  // col, row, 3mask, 4mask, det-col, det-row, custom
  std::vector<MaskGrid> masks;
  ThreatModel threat{1, 1, 1, 1};

  // recovery only
  std::optional<int> declared_strength;
  std::optional<BlockPartition> partition;
  /// block_assignment[q * cols + r] = 0-based index of the mask in which
  /// block (q, r) is visible.
  std::vector<int> block_assignment;

  // detection only: stripe width W'' and start offset of each mask.
  std::optional<int> stripe_width;
  std::vector<int> stripe_offsets;

  std::vector<std::string> warnings;

  int size() const noexcept { return static_cast<int>(masks.size()); }
  MaskSet transposed() const;
};

inline constexpr int kBuilderVersion = 1;

MaskSet build_column_masks(const BlockPartition& partition, int num_masks);
MaskSet build_row_masks(const BlockPartition& partition, int num_masks);
MaskSet build_3mask(const BlockPartition& partition, int num_masks);
MaskSet build_4mask(const BlockPartition& partition, int num_masks);

/// Vertical stripes of width mask_width at stride mask_width - W' + 1.
MaskSet build_detection_column_masks(const ThreatModel& tm, int mask_width);
MaskSet build_detection_row_masks(const ThreatModel& tm, int mask_height);

/// Vertical stripes at an arbitrary stride; the last stripe is clamped flush
/// with the right edge. Coverage is NOT checked here.
MaskSet build_strided_column_masks(const ThreatModel& tm, int mask_width, int stride);

/// Exhaustive max over locations of the number of masks not covering it.
int compute_strength(const MaskSet& ms, const ThreatModel& tm);

/// First location that leaves more than max_strength masks uncovered, if any.
std::optional<PatchLocation> find_strength_violation(const MaskSet& ms, const ThreatModel& tm,
                                                     int max_strength);

/// Exhaustive: every location is covered by some mask.
bool verify_detection_coverage(const MaskSet& ms, const ThreatModel& tm);
std::optional<PatchLocation> find_uncovered_location(const MaskSet& ms, const ThreatModel& tm);

/// Each block visible in its assigned mask and masked in all others.
bool verify_block_uniqueness(const MaskSet& ms);

/// Builds a mask set by scheme name. num_masks <= 0 selects the scheme's
/// default (col/row 5, 3mask 7, 4mask 9); stripe_width <= 0 selects W'.
MaskSet build_scheme(const std::string& scheme, const ThreatModel& tm, int num_masks,
                     int stripe_width = 0);

// Directory layout: mask_000.pgm ... plus maskset.json.
void save_maskset(const MaskSet& ms, const std::filesystem::path& dir);
MaskSet load_maskset(const std::filesystem::path& dir);

}  // namespace patchcert
