#include "patchcert/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "patchcert/errors.hpp"
#include "patchcert/metrics.hpp"

namespace patchcert::oracle {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

ImageGrid apply_placement(const ImageGrid& image, const Placement& placement,
                          const PatchBattery& battery, int content_index) {
  ImageGrid out = image;
  for (std::size_t i = 0; i < placement.size(); ++i) {
    const auto& loc = placement[i];
    out = paste_patch(out,
                      battery.content(content_index, loc.height, loc.width, image.channels(), i),
                      loc);
  }
  return out;
}

// All 8-bit samples of a masked image; masked samples are zero. Same result
// as apply_mask(image, mask).pixels.to_bytes() without the intermediate grid.
std::vector<std::uint8_t> masked_bytes(const ImageGrid& image, const MaskGrid& mask) {
  std::vector<std::uint8_t> out(image.data().size(), 0);
  const int ch = image.channels();
  std::size_t i = 0;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c, i += static_cast<std::size_t>(ch)) {
      if (!mask.visible(r, c)) continue;
      const auto px = image.pixel(r, c);
      for (int k = 0; k < ch; ++k)
        out[i + static_cast<std::size_t>(k)] =
            static_cast<std::uint8_t>(std::lround(px[static_cast<std::size_t>(k)] * 255.0f));
    }
  }
  return out;
}

PatchLocation shifted(const PatchLocation& loc, int dr, int dc) {
  return {loc.top + dr, loc.left + dc, loc.height, loc.width};
}

bool inside(const PatchLocation& loc, const ThreatModel& tm) {
  return loc.top >= 0 && loc.left >= 0 && loc.bottom() <= tm.image_height() &&
         loc.right() <= tm.image_width();
}

}  // namespace

PatchBattery::PatchBattery(int random_count, std::uint64_t seed)
    : random_count_(random_count), seed_(seed) {
  if (random_count < 0) throw Error("negative battery size");
}

ImageGrid PatchBattery::content(int index, int height, int width, int channels,
                                std::uint64_t salt) const {
  if (index < 0 || index >= size()) throw Error("battery index out of range");
  if (index == 0) return ImageGrid(height, width, channels, 0.0f);
  if (index == 1) return ImageGrid(height, width, channels, 1.0f);
  Rng rng(mix(seed_ ^ mix(static_cast<std::uint64_t>(index) ^ mix(salt))));
  return random_image(height, width, channels, rng);
}

ErasureReport audit_masking_erasure(const ImageGrid& image, const MaskSet& ms,
                                    const ThreatModel& tm, const PatchBattery& battery) {
  if (image.height() != tm.image_height() || image.width() != tm.image_width()) {
    throw DimensionError("image does not match the threat model");
  }
  ErasureReport report;
  report.scheme = ms.scheme;
  report.masks = ms.size();
  report.battery_size = battery.size();

  std::vector<std::vector<std::uint8_t>> clean;
  clean.reserve(ms.masks.size());
  for (const auto& m : ms.masks) clean.push_back(masked_bytes(image, m));

  for (const auto& loc : enumerate_locations(tm)) {
    ++report.locations;
    std::vector<int> covering;
    for (int k = 0; k < ms.size(); ++k)
      if (covers(ms.masks[static_cast<std::size_t>(k)], loc)) covering.push_back(k);
    if (covering.empty()) continue;
    for (int p = 0; p < battery.size(); ++p) {
      const ImageGrid patched =
          paste_patch(image, battery.content(p, loc.height, loc.width, image.channels()), loc);
      for (int k : covering) {
        ++report.checks;
        if (masked_bytes(patched, ms.masks[static_cast<std::size_t>(k)]) !=
            clean[static_cast<std::size_t>(k)]) {
          report.violations.push_back({loc, k, p});
        }
      }
    }
  }
  return report;
}

std::vector<Placement> patch_placements(const ThreatModel& tm, int num_patches,
                                        std::size_t random_pairs, std::uint64_t seed) {
  const auto locations = enumerate_locations(tm);
  std::vector<Placement> out;
  if (num_patches == 1) {
    out.reserve(locations.size());
    for (const auto& loc : locations) out.push_back({loc});
    return out;
  }
  if (num_patches != 2) throw Error("audits support one or two patches");

  std::set<std::pair<PatchLocation, PatchLocation>> pairs;
  const auto add = [&](PatchLocation a, PatchLocation b) {
    if (!inside(a, tm) || !inside(b, tm) || a == b) return;
    if (b < a) std::swap(a, b);
    pairs.insert({a, b});
  };

  const int max_top = tm.image_height() - tm.patch_height();
  const int max_left = tm.image_width() - tm.patch_width();
  const std::array<PatchLocation, 4> corners = {{
      {0, 0, tm.patch_height(), tm.patch_width()},
      {0, max_left, tm.patch_height(), tm.patch_width()},
      {max_top, 0, tm.patch_height(), tm.patch_width()},
      {max_top, max_left, tm.patch_height(), tm.patch_width()},
  }};
  for (std::size_t i = 0; i < corners.size(); ++i)
    for (std::size_t j = i + 1; j < corners.size(); ++j) add(corners[i], corners[j]);

  for (int top = 0; top <= max_top; top += tm.patch_height()) {
    for (int left = 0; left <= max_left; left += tm.patch_width()) {
      const PatchLocation loc{top, left, tm.patch_height(), tm.patch_width()};
      add(loc, shifted(loc, 0, tm.patch_width()));
      add(loc, shifted(loc, tm.patch_height(), 0));
      add(loc, shifted(loc, tm.patch_height(), tm.patch_width()));
    }
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < random_pairs; ++i) {
    const auto& a = locations[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(locations.size()) - 1))];
    const auto& b = locations[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(locations.size()) - 1))];
    add(a, b);
  }

  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

SoundnessReport audit_recovery_soundness(const ImageGrid& image, const AuditSetup& setup,
                                         const PatchBattery& battery) {
  const MaskSet& ms = setup.masks;
  const CertifiedOutput clean =
      certify_recovery(image, ms, setup.demasker, setup.segmenter, setup.num_patches);

  SoundnessReport report;
  report.mode = CertMode::recovery;
  report.scheme = ms.scheme;
  report.num_patches = setup.num_patches;
  report.battery_size = battery.size();
  report.certified_pixels = clean.cert_map.count();

  const auto placements =
      patch_placements(ms.threat, setup.num_patches, setup.two_patch_samples, setup.seed);
  report.placements = placements.size();
  for (const auto& placement : placements) {
    for (int p = 0; p < battery.size(); ++p) {
      const ImageGrid attacked = apply_placement(image, placement, battery, p);
      const CertifiedOutput h =
          recovery_vote(build_segmentation_set(attacked, ms, setup.demasker, setup.segmenter));
      ++report.patched_inputs;
      for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
          if (!clean.cert_map.at(r, c)) continue;
          ++report.pixel_checks;
          if (h.segmentation.at(r, c) != clean.segmentation.at(r, c)) {
            report.violations.push_back(
                {placement, p, r, c, clean.segmentation.at(r, c), h.segmentation.at(r, c)});
          }
        }
      }
    }
  }
  return report;
}

SoundnessReport audit_detection_soundness(const ImageGrid& image, const AuditSetup& setup,
                                          const PatchBattery& battery) {
  const MaskSet& ms = setup.masks;
  const CertifiedOutput clean =
      certify_detection(image, ms, setup.demasker, setup.segmenter);

  SoundnessReport report;
  report.mode = CertMode::detection;
  report.scheme = ms.scheme;
  report.num_patches = 1;
  report.battery_size = battery.size();
  report.certified_pixels = clean.cert_map.count();

  const auto placements = patch_placements(ms.threat, 1, 0, setup.seed);
  report.placements = placements.size();
  for (const auto& placement : placements) {
    for (int p = 0; p < battery.size(); ++p) {
      const ImageGrid attacked = apply_placement(image, placement, battery, p);
      const SegMap base = setup.segmenter.segment(attacked);
      const CertifiedOutput v = detection_verify(
          base, build_segmentation_set(attacked, ms, setup.demasker, setup.segmenter));
      ++report.patched_inputs;
      for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
          if (!clean.cert_map.at(r, c) || !v.cert_map.at(r, c)) continue;
          ++report.pixel_checks;
          if (base.at(r, c) != clean.segmentation.at(r, c)) {
            report.violations.push_back(
                {placement, p, r, c, clean.segmentation.at(r, c), base.at(r, c)});
          }
        }
      }
    }
  }
  return report;
}

AttackResult attack_search(const ImageGrid& image, const SegMap& gt, const SegmentFn& model,
                           const ThreatModel& tm, int budget, std::uint64_t seed) {
  if (image.height() != tm.image_height() || image.width() != tm.image_width()) {
    throw DimensionError("image does not match the threat model");
  }
  const int ph = tm.patch_height();
  const int pw = tm.patch_width();
  const int ch = image.channels();

  AttackResult best;
  best.clean_quality = metrics::global_accuracy(model(image), gt);
  best.quality = best.clean_quality;
  best.location = {0, 0, ph, pw};
  best.patch = ImageGrid(ph, pw, ch, 0.0f);

  const auto attempt = [&](const PatchLocation& loc, const ImageGrid& patch) {
    ++best.trials;
    const double q = metrics::global_accuracy(model(paste_patch(image, patch, loc)), gt);
    if (q < best.quality) {
      best.quality = q;
      best.location = loc;
      best.patch = patch;
    }
  };

  std::vector<ImageGrid> saturated = {ImageGrid(ph, pw, ch, 0.0f), ImageGrid(ph, pw, ch, 1.0f)};
  if (ch == 3) {
    for (int k = 0; k < 3; ++k) {
      ImageGrid pure(ph, pw, ch, 0.0f);
      for (int r = 0; r < ph; ++r)
        for (int c = 0; c < pw; ++c) pure.set(r, c, k, 1.0f);
      saturated.push_back(std::move(pure));
    }
  }

  std::vector<int> tops;
  std::vector<int> lefts;
  for (int t = 0; t <= tm.image_height() - ph; t += ph) tops.push_back(t);
  if (tops.back() != tm.image_height() - ph) tops.push_back(tm.image_height() - ph);
  for (int l = 0; l <= tm.image_width() - pw; l += pw) lefts.push_back(l);
  if (lefts.back() != tm.image_width() - pw) lefts.push_back(tm.image_width() - pw);

  for (int t : tops) {
    for (int l : lefts) {
      for (const auto& patch : saturated) {
        if (best.trials >= budget) return best;
        attempt({t, l, ph, pw}, patch);
      }
    }
  }

  Rng rng(seed);
  while (best.trials < budget) {
    const PatchLocation loc{rng.uniform_int(0, tm.image_height() - ph),
                            rng.uniform_int(0, tm.image_width() - pw), ph, pw};
    if (rng.uniform_int(0, 1) == 0) {
      attempt(loc, random_image(ph, pw, ch, rng));
    } else {
      attempt(loc, saturated[static_cast<std::size_t>(
                       rng.uniform_int(0, static_cast<int>(saturated.size()) - 1))]);
    }
  }
  return best;
}

}  // namespace patchcert::oracle
