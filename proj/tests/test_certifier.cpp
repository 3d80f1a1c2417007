#include <doctest.h>

#include "patchcert/certifier.hpp"
#include "patchcert/errors.hpp"
#include "patchcert/scenes.hpp"
#include "support/naive.hpp"

using namespace patchcert;

namespace {

SegSet stack(const std::vector<std::vector<Label>>& maps, int h, int w, int classes) {
  SegSet s;
  for (const auto& m : maps) s.entries.emplace_back(h, w, classes, m);
  return s;
}

class FlakySegmenter final : public SegmentationBackend {
 public:
  SegMap segment(const ImageGrid& image) const override {
    return SegMap(image.height(), image.width(), 3);
  }
  int num_classes() const override { return 3; }
  bool deterministic() const override { return false; }
  std::string fingerprint() const override { return "flaky"; }
};

ImageGrid solid(int h, int w, int channel) {
  ImageGrid x(h, w, 3);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) x.set(r, c, channel, 1.0f);
  return x;
}

}  // namespace

TEST_CASE("recovery condition K >= 2NT + 1") {
  CHECK_NOTHROW(check_recovery_condition(5, 2, 1));
  CHECK_NOTHROW(check_recovery_condition(7, 3, 1));
  CHECK_NOTHROW(check_recovery_condition(9, 4, 1));
  CHECK_NOTHROW(check_recovery_condition(9, 2, 2));
  for (auto [k, t, n] : {std::tuple{4, 2, 1}, {6, 3, 1}, {8, 4, 1}, {8, 2, 2}}) {
    try {
      check_recovery_condition(k, t, n);
      FAIL("condition should fail");
    } catch (const InsufficientMasksError& e) {
      CHECK(e.required_masks() == 2 * n * t + 1);
    }
  }
  CHECK(min_recovery_masks(2, 3) == 13);
}

TEST_CASE("majority vote: ties go to the smallest class and are not certified") {
  const SegSet s = stack({{1}, {1}, {2}, {2}, {0}}, 1, 1, 3);
  const CertifiedOutput out = recovery_vote(s);
  CHECK(out.segmentation.at(0, 0) == 1);
  CHECK_FALSE(out.cert_map.at(0, 0));

  const CertifiedOutput unanimous = recovery_vote(stack({{2}, {2}, {2}}, 1, 1, 3));
  CHECK(unanimous.segmentation.at(0, 0) == 2);
  CHECK(unanimous.cert_map.at(0, 0));
}

TEST_CASE("vote agrees with a histogram on random label stacks") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = rng.uniform_int(1, 9);
    const int classes = rng.uniform_int(1, 5);
    const int n = 6;
    std::vector<std::vector<Label>> maps(k, std::vector<Label>(n));
    for (auto& m : maps)
      for (auto& l : m) l = static_cast<Label>(rng.uniform_int(0, classes - 1));
    const CertifiedOutput out = recovery_vote(stack(maps, 2, 3, classes));
    for (int p = 0; p < n; ++p) {
      std::vector<Label> column;
      for (const auto& m : maps) column.push_back(m[p]);
      const auto want = naive::vote(column);
      CHECK(out.segmentation.labels()[p] == want.label);
      CHECK(out.cert_map.at(p / 3, p % 3) == want.unanimous);
    }
  }
}

TEST_CASE("detection verification keeps the base output") {
  const SegSet s = stack({{0, 1}, {0, 2}}, 1, 2, 3);
  const SegMap base(1, 2, 3, std::vector<Label>{0, 1});
  const CertifiedOutput out = detection_verify(base, s);
  CHECK(out.segmentation == base);
  CHECK(out.cert_map.at(0, 0));
  CHECK_FALSE(out.cert_map.at(0, 1));
}

TEST_CASE("uniform image certifies everywhere, every scheme") {
  const ThreatModel tm(15, 15, 3, 3);
  const ImageGrid x = solid(15, 15, 2);
  for (const char* scheme : {"col", "row", "3mask", "4mask"}) {
    const MaskSet ms = build_scheme(scheme, tm, 0);
    const CertifiedOutput out =
        certify_recovery(x, ms, NearestFillDemasker(), DominantChannelSegmenter());
    CHECK(out.cert_map.count() == 225u);
    CHECK(out.segmentation.at(7, 7) == 2);
    CHECK(out.meta.strength == *ms.declared_strength);
  }
  const MaskSet det = build_scheme("det-col", tm, 0);
  const CertifiedOutput d =
      certify_detection(x, det, NearestFillDemasker(), DominantChannelSegmenter());
  CHECK(d.cert_map.count() == 225u);
  CHECK(d.mode == CertMode::detection);
}

TEST_CASE("declared strength is checked against the masks") {
  const ThreatModel tm(12, 12, 2, 2);
  MaskSet ms = build_scheme("3mask", tm, 7);
  CHECK(verified_strength(ms) == 3);
  ms.declared_strength = 2;
  CHECK_THROWS_AS(certify_recovery(synthetic_scene(12, 12, 0), ms, NearestFillDemasker(),
                                   DominantChannelSegmenter()),
                  VerificationError);
}

TEST_CASE("too few masks for the patch count") {
  const ThreatModel tm(12, 12, 2, 2);
  const MaskSet ms = build_scheme("col", tm, 5);
  CHECK_THROWS_AS(certify_recovery(synthetic_scene(12, 12, 0), ms, NearestFillDemasker(),
                                   DominantChannelSegmenter(), 2),
                  InsufficientMasksError);
  const MaskSet nine = build_scheme("col", tm, 9);
  CHECK_NOTHROW(certify_recovery(synthetic_scene(12, 12, 0), nine, NearestFillDemasker(),
                                 DominantChannelSegmenter(), 2));
}

TEST_CASE("detection refuses gaps, wrong kinds and nondeterminism") {
  const ThreatModel tm(10, 12, 3, 3);
  const ImageGrid x = synthetic_scene(10, 12, 4);
  MaskSet gappy = build_strided_column_masks(tm, 4, 3);
  gappy.kind = MaskSetKind::detection;
  CHECK_THROWS_AS(certify_detection(x, gappy, NearestFillDemasker(), DominantChannelSegmenter()),
                  VerificationError);

  const MaskSet det = build_scheme("det-col", tm, 0, 5);
  CHECK_THROWS_AS(certify_detection(x, det, NearestFillDemasker(), FlakySegmenter()),
                  BackendError);
  CHECK_NOTHROW(certify_detection(x, det, NearestFillDemasker(), FlakySegmenter(),
                                  DetectionOptions{true}));
  CHECK_THROWS_AS(certify_recovery(x, det, NearestFillDemasker(), DominantChannelSegmenter()),
                  Error);
  CHECK_THROWS_AS(certify_detection(x, build_scheme("col", tm, 0), NearestFillDemasker(),
                                    DominantChannelSegmenter()),
                  Error);
}

TEST_CASE("certified fraction") {
  const CertifiedOutput out = recovery_vote(stack({{0, 1}, {0, 2}, {0, 2}}, 1, 2, 3));
  CHECK(out.certified_fraction() == doctest::Approx(0.5));
}
