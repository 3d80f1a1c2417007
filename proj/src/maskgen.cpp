#include "patchcert/maskgen.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "patchcert/errors.hpp"
#include "patchcert/io.hpp"

namespace patchcert {

namespace {

using json = nlohmann::json;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Summed-area table of visible pixels, (H+1) x (W+1).
class VisibleCounts {
 public:
  explicit VisibleCounts(const MaskGrid& mask)
      : width_(mask.width() + 1),
        sums_(static_cast<std::size_t>(mask.height() + 1) * (mask.width() + 1), 0) {
    for (int r = 0; r < mask.height(); ++r)
      for (int c = 0; c < mask.width(); ++c)
        at(r + 1, c + 1) = at(r, c + 1) + at(r + 1, c) - at(r, c) + (mask.visible(r, c) ? 1 : 0);
  }

  int in(const Rect& rect) const {
    return at(rect.bottom(), rect.right()) - at(rect.top, rect.right()) -
           at(rect.bottom(), rect.left) + at(rect.top, rect.left);
  }

 private:
  int& at(int r, int c) { return sums_[static_cast<std::size_t>(r) * width_ + c]; }
  int at(int r, int c) const { return sums_[static_cast<std::size_t>(r) * width_ + c]; }

  int width_;
  std::vector<int> sums_;
};

void check_mask_shapes(const MaskSet& ms, const ThreatModel& tm) {
  for (const auto& m : ms.masks) {
    if (m.height() != tm.image_height() || m.width() != tm.image_width()) {
      throw DimensionError("mask set does not match the threat model image size");
    }
  }
}

void check_num_masks(int num_masks, int minimum, const char* scheme) {
  if (num_masks < minimum) {
    throw GeometryError(std::string(scheme) + " needs at least " + std::to_string(minimum) +
                        " masks, got " + std::to_string(num_masks));
  }
}

MaskSet from_assignment(const BlockPartition& partition, int num_masks,
                        std::vector<int> assignment, std::string scheme, int strength) {
  MaskSet ms;
  ms.kind = MaskSetKind::recovery;
  ms.scheme = std::move(scheme);
  ms.threat = partition.threat();
  ms.declared_strength = strength;
  ms.partition = partition;
  ms.block_assignment = std::move(assignment);
  ms.masks.assign(static_cast<std::size_t>(num_masks),
                  MaskGrid(partition.image_height(), partition.image_width(), false));
  std::vector<int> blocks_per_mask(static_cast<std::size_t>(num_masks), 0);
  for (int q = 0; q < partition.rows(); ++q) {
    for (int r = 0; r < partition.cols(); ++r) {
      const int k = ms.block_assignment[static_cast<std::size_t>(q * partition.cols() + r)];
      ++blocks_per_mask[static_cast<std::size_t>(k)];
      const Rect b = partition.block(q, r);
      auto& mask = ms.masks[static_cast<std::size_t>(k)];
      for (int i = b.top; i < b.bottom(); ++i)
        for (int j = b.left; j < b.right(); ++j) mask.set_visible(i, j, true);
    }
  }
  for (int k = 0; k < num_masks; ++k) {
    if (blocks_per_mask[static_cast<std::size_t>(k)] == 0) {
      ms.warnings.push_back("mask " + std::to_string(k) + " has no visible blocks (" +
                            std::to_string(partition.block_count()) + " blocks for " +
                            std::to_string(num_masks) + " masks)");
    }
  }
  return ms;
}

void enforce_strength(const MaskSet& ms, int max_strength) {
  if (auto loc = find_strength_violation(ms, ms.threat, max_strength)) {
    const auto& p = *ms.partition;
    throw VerificationError(ms.scheme + " on " + std::to_string(p.image_height()) + "x" +
                            std::to_string(p.image_width()) + " image with " +
                            std::to_string(p.block_height()) + "x" +
                            std::to_string(p.block_width()) + " blocks and K=" +
                            std::to_string(ms.size()) + " exceeds strength " +
                            std::to_string(max_strength) + " at " + to_string(*loc));
  }
}

std::string swap_orientation(const std::string& scheme) {
  if (scheme == "col") return "row";
  if (scheme == "row") return "col";
  if (scheme == "det-col") return "det-row";
  if (scheme == "det-row") return "det-col";
  return scheme;
}

}  // namespace

BlockPartition::BlockPartition(int image_height, int image_width, int block_height,
                               int block_width)
    : image_height_(image_height),
      image_width_(image_width),
      block_height_(block_height),
      block_width_(block_width) {
  if (image_height < 1 || image_width < 1 || block_height < 1 || block_width < 1) {
    throw GeometryError("block partition needs positive dimensions");
  }
  if (block_height > image_height || block_width > image_width) {
    throw GeometryError("blocks larger than the image");
  }
  rows_ = ceil_div(image_height, block_height);
  cols_ = ceil_div(image_width, block_width);
}

BlockPartition BlockPartition::for_threat(const ThreatModel& tm) {
  return BlockPartition(tm.image_height(), tm.image_width(), tm.patch_height(),
                        tm.patch_width());
}

Rect BlockPartition::block(int q, int r) const {
  const int top = q * block_height_;
  const int left = r * block_width_;
  return Rect{top, left, std::min(block_height_, image_height_ - top),
              std::min(block_width_, image_width_ - left)};
}

ThreatModel BlockPartition::threat() const {
  return ThreatModel(image_height_, image_width_, block_height_, block_width_);
}

BlockPartition BlockPartition::transposed() const {
  return BlockPartition(image_width_, image_height_, block_width_, block_height_);
}

std::string to_string(MaskSetKind kind) {
  return kind == MaskSetKind::recovery ? "recovery" : "detection";
}

MaskSet MaskSet::transposed() const {
  MaskSet out;
  out.kind = kind;
  out.scheme = swap_orientation(scheme);
  out.threat = threat.transposed();
  out.declared_strength = declared_strength;
  out.stripe_width = stripe_width;
  out.stripe_offsets = stripe_offsets;
  out.warnings = warnings;
  out.masks.reserve(masks.size());
  for (const auto& m : masks) out.masks.push_back(m.transposed());
  if (partition) {
    out.partition = partition->transposed();
    out.block_assignment.resize(block_assignment.size());
    for (int q = 0; q < partition->rows(); ++q)
      for (int r = 0; r < partition->cols(); ++r)
        out.block_assignment[static_cast<std::size_t>(r * partition->rows() + q)] =
            block_assignment[static_cast<std::size_t>(q * partition->cols() + r)];
  }
  return out;
}

MaskSet build_column_masks(const BlockPartition& partition, int num_masks) {
  check_num_masks(num_masks, 2, "column masks");
  std::vector<int> assignment(static_cast<std::size_t>(partition.block_count()));
  for (int q = 0; q < partition.rows(); ++q)
    for (int r = 0; r < partition.cols(); ++r)
      assignment[static_cast<std::size_t>(q * partition.cols() + r)] = r % num_masks;
  return from_assignment(partition, num_masks, std::move(assignment), "col", 2);
}

MaskSet build_row_masks(const BlockPartition& partition, int num_masks) {
  return build_column_masks(partition.transposed(), num_masks).transposed();
}

MaskSet build_3mask(const BlockPartition& partition, int num_masks) {
  check_num_masks(num_masks, 1, "3-mask");
  // Even rows: a single block, then pairs. Odd rows: pairs from the start.
  // Each group takes the next mask index, wrapping at K; the count carries
  // over from one row to the next.
  std::vector<int> assignment(static_cast<std::size_t>(partition.block_count()));
  int next = 0;
  for (int q = 0; q < partition.rows(); ++q) {
    int r = 0;
    bool first_group = true;
    while (r < partition.cols()) {
      const int group = (q % 2 == 0 && first_group) ? 1 : 2;
      for (int i = r; i < std::min(r + group, partition.cols()); ++i)
        assignment[static_cast<std::size_t>(q * partition.cols() + i)] = next;
      next = (next + 1) % num_masks;
      r += group;
      first_group = false;
    }
  }
  MaskSet ms = from_assignment(partition, num_masks, std::move(assignment), "3mask", 3);
  enforce_strength(ms, 3);
  return ms;
}

MaskSet build_4mask(const BlockPartition& partition, int num_masks) {
  check_num_masks(num_masks, 1, "4-mask");
  std::vector<int> assignment(static_cast<std::size_t>(partition.block_count()));
  for (int q = 0; q < partition.rows(); ++q) {
    for (int r = 0; r < partition.cols(); ++r) {
      assignment[static_cast<std::size_t>(q * partition.cols() + r)] =
          num_masks == 9 ? (q % 3) * 3 + (r % 3) : (q * partition.cols() + r) % num_masks;
    }
  }
  MaskSet ms = from_assignment(partition, num_masks, std::move(assignment), "4mask", 4);
  try {
    enforce_strength(ms, 4);
  } catch (const VerificationError& e) {
    throw Error(std::string("internal error: ") + e.what());
  }
  return ms;
}

MaskSet build_strided_column_masks(const ThreatModel& tm, int mask_width, int stride) {
  if (mask_width < tm.patch_width()) {
    throw GeometryError("detection stripe width " + std::to_string(mask_width) +
                        " is narrower than the patch width " +
                        std::to_string(tm.patch_width()));
  }
  if (mask_width > tm.image_width()) {
    throw GeometryError("detection stripe width " + std::to_string(mask_width) +
                        " exceeds the image width " + std::to_string(tm.image_width()));
  }
  if (stride < 1) throw GeometryError("stripe stride must be positive");
  const int span = tm.image_width() - mask_width;
  const int count = ceil_div(span, stride) + 1;

  MaskSet ms;
  ms.kind = MaskSetKind::detection;
  ms.scheme = "det-col";
  ms.threat = tm;
  ms.stripe_width = mask_width;
  for (int i = 0; i < count; ++i) {
    const int offset = std::min(i * stride, span);
    ms.stripe_offsets.push_back(offset);
    MaskGrid mask(tm.image_height(), tm.image_width(), true);
    for (int r = 0; r < tm.image_height(); ++r)
      for (int c = offset; c < offset + mask_width; ++c) mask.set_visible(r, c, false);
    ms.masks.push_back(std::move(mask));
  }
  return ms;
}

MaskSet build_detection_column_masks(const ThreatModel& tm, int mask_width) {
  MaskSet ms = build_strided_column_masks(tm, mask_width, mask_width - tm.patch_width() + 1);
  if (auto loc = find_uncovered_location(ms, tm)) {
    throw VerificationError("detection stripes leave location " + to_string(*loc) +
                            " uncovered");
  }
  return ms;
}

MaskSet build_detection_row_masks(const ThreatModel& tm, int mask_height) {
  return build_detection_column_masks(tm.transposed(), mask_height).transposed();
}

std::optional<PatchLocation> find_strength_violation(const MaskSet& ms, const ThreatModel& tm,
                                                     int max_strength) {
  check_mask_shapes(ms, tm);
  std::vector<VisibleCounts> counts(ms.masks.begin(), ms.masks.end());
  for (const auto& loc : enumerate_locations(tm)) {
    int affected = 0;
    for (const auto& c : counts) affected += c.in(loc) > 0 ? 1 : 0;
    if (affected > max_strength) return loc;
  }
  return std::nullopt;
}

int compute_strength(const MaskSet& ms, const ThreatModel& tm) {
  check_mask_shapes(ms, tm);
  std::vector<VisibleCounts> counts(ms.masks.begin(), ms.masks.end());
  int strength = 0;
  for (const auto& loc : enumerate_locations(tm)) {
    int affected = 0;
    for (const auto& c : counts) affected += c.in(loc) > 0 ? 1 : 0;
    strength = std::max(strength, affected);
  }
  return strength;
}

std::optional<PatchLocation> find_uncovered_location(const MaskSet& ms, const ThreatModel& tm) {
  check_mask_shapes(ms, tm);
  std::vector<VisibleCounts> counts(ms.masks.begin(), ms.masks.end());
  for (const auto& loc : enumerate_locations(tm)) {
    const bool covered =
        std::any_of(counts.begin(), counts.end(), [&](const auto& c) { return c.in(loc) == 0; });
    if (!covered) return loc;
  }
  return std::nullopt;
}

bool verify_detection_coverage(const MaskSet& ms, const ThreatModel& tm) {
  return !find_uncovered_location(ms, tm).has_value();
}

bool verify_block_uniqueness(const MaskSet& ms) {
  if (!ms.partition) return false;
  const auto& p = *ms.partition;
  if (ms.block_assignment.size() != static_cast<std::size_t>(p.block_count())) return false;
  if (ms.masks.empty()) return p.block_count() == 0;
  for (int q = 0; q < p.rows(); ++q) {
    for (int r = 0; r < p.cols(); ++r) {
      const int owner = ms.block_assignment[static_cast<std::size_t>(q * p.cols() + r)];
      if (owner < 0 || owner >= ms.size()) return false;
      const Rect b = p.block(q, r);
      for (int k = 0; k < ms.size(); ++k) {
        const auto& mask = ms.masks[static_cast<std::size_t>(k)];
        if (mask.height() != p.image_height() || mask.width() != p.image_width()) return false;
        for (int i = b.top; i < b.bottom(); ++i)
          for (int j = b.left; j < b.right(); ++j)
            if (mask.visible(i, j) != (k == owner)) return false;
      }
    }
  }
  return true;
}

MaskSet build_scheme(const std::string& scheme, const ThreatModel& tm, int num_masks,
                     int stripe_width) {
  const auto pick = [&](int fallback) { return num_masks > 0 ? num_masks : fallback; };
  MaskSet ms;
  if (scheme == "col") {
    ms = build_column_masks(BlockPartition::for_threat(tm), pick(5));
  } else if (scheme == "row") {
    ms = build_row_masks(BlockPartition::for_threat(tm), pick(5));
  } else if (scheme == "3mask") {
    ms = build_3mask(BlockPartition::for_threat(tm), pick(7));
  } else if (scheme == "4mask") {
    ms = build_4mask(BlockPartition::for_threat(tm), pick(9));
  } else if (scheme == "det-col") {
    ms = build_detection_column_masks(tm, stripe_width > 0 ? stripe_width : tm.patch_width());
  } else if (scheme == "det-row") {
    ms = build_detection_row_masks(tm, stripe_width > 0 ? stripe_width : tm.patch_height());
  } else {
    throw GeometryError("unknown mask scheme '" + scheme + "'");
  }
  ms.threat = tm;
  return ms;
}

void save_maskset(const MaskSet& ms, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["kind"] = to_string(ms.kind);
  meta["builder"] = ms.scheme;
  meta["builder_version"] = kBuilderVersion;
  meta["K"] = ms.size();
  meta["T"] = ms.declared_strength ? json(*ms.declared_strength) : json(nullptr);
  meta["image_height"] = ms.threat.image_height();
  meta["image_width"] = ms.threat.image_width();
  meta["patch_height"] = ms.threat.patch_height();
  meta["patch_width"] = ms.threat.patch_width();
  meta["num_patches"] = ms.threat.num_patches();
  if (ms.partition) {
    meta["block_height"] = ms.partition->block_height();
    meta["block_width"] = ms.partition->block_width();
    meta["block_rows"] = ms.partition->rows();
    meta["block_cols"] = ms.partition->cols();
    meta["block_assignment"] = ms.block_assignment;
  }
  if (ms.stripe_width) {
    meta["stripe_width"] = *ms.stripe_width;
    meta["stripe_offsets"] = ms.stripe_offsets;
  }
  for (int k = 0; k < ms.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "mask_%03d.pgm", k);
    io::write_mask(dir / name, ms.masks[static_cast<std::size_t>(k)]);
  }
  io::write_text_atomic(dir / "maskset.json", meta.dump(2) + "\n");
}

MaskSet load_maskset(const std::filesystem::path& dir) {
  json meta;
  try {
    const auto bytes = io::read_bytes(dir / "maskset.json");
    meta = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw IoError((dir / "maskset.json").string() + ": " + e.what());
  }
  try {
    MaskSet ms;
    const std::string kind = meta.at("kind").get<std::string>();
    if (kind != "recovery" && kind != "detection") throw IoError("unknown mask set kind " + kind);
    ms.kind = kind == "recovery" ? MaskSetKind::recovery : MaskSetKind::detection;
    ms.scheme = meta.at("builder").get<std::string>();
    ms.threat = ThreatModel(meta.at("image_height").get<int>(), meta.at("image_width").get<int>(),
                            meta.at("patch_height").get<int>(), meta.at("patch_width").get<int>(),
                            meta.value("num_patches", 1));
    if (!meta.at("T").is_null()) ms.declared_strength = meta.at("T").get<int>();
    if (meta.contains("block_assignment")) {
      ms.partition = BlockPartition(ms.threat.image_height(), ms.threat.image_width(),
                                    meta.at("block_height").get<int>(),
                                    meta.at("block_width").get<int>());
      ms.block_assignment = meta.at("block_assignment").get<std::vector<int>>();
    }
    if (meta.contains("stripe_width")) {
      ms.stripe_width = meta.at("stripe_width").get<int>();
      ms.stripe_offsets = meta.at("stripe_offsets").get<std::vector<int>>();
    }
    const int k = meta.at("K").get<int>();
    if (k < 1) throw IoError("mask set must contain at least one mask");
    for (int i = 0; i < k; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "mask_%03d.pgm", i);
      ms.masks.push_back(io::read_mask(dir / name));
    }
    check_mask_shapes(ms, ms.threat);
    return ms;
  } catch (const json::exception& e) {
    throw IoError((dir / "maskset.json").string() + ": " + e.what());
  }
}

}  // namespace patchcert
