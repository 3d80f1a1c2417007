#include <doctest.h>

#include "patchcert/errors.hpp"
#include "patchcert/grid.hpp"
#include "patchcert/scenes.hpp"
#include "patchcert/threat.hpp"

using namespace patchcert;

TEST_CASE("image grid rejects out-of-range intensities") {
  CHECK_THROWS_AS(ImageGrid(1, 1, 1, std::vector<float>{1.5f}), Error);
  CHECK_THROWS_AS(ImageGrid(1, 2, 1, std::vector<float>{0.5f}), DimensionError);
  ImageGrid g(2, 2, 3, 0.25f);
  CHECK(g.at(1, 1, 2) == doctest::Approx(0.25f));
  CHECK_THROWS(g.set(0, 0, 0, -0.1f));
}

TEST_CASE("byte round trip is exact for 8-bit values") {
  std::vector<std::uint8_t> bytes(4 * 5 * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i * 17);
  const auto g = ImageGrid::from_bytes(4, 5, 3, bytes);
  CHECK(g.to_bytes() == bytes);
}

TEST_CASE("seg map validates labels and honours ignore label") {
  CHECK_THROWS_AS(SegMap(1, 2, 3, std::vector<Label>{0, 3}), Error);
  SegMap s(1, 2, 3, std::vector<Label>{0, 255}, Label{255});
  CHECK(s.ignored(0, 1));
  CHECK_FALSE(s.ignored(0, 0));
}

TEST_CASE("location count and enumeration") {
  ThreatModel tm(6, 10, 2, 3);
  CHECK(tm.location_count() == 40u);
  const auto locs = enumerate_locations(tm);
  REQUIRE(locs.size() == 40u);
  CHECK(locs.front() == Rect{0, 0, 2, 3});
  CHECK(locs.back() == Rect{4, 7, 2, 3});
  CHECK(std::is_sorted(locs.begin(), locs.end()));
}

TEST_CASE("threat model validation") {
  CHECK_THROWS_AS(ThreatModel(4, 4, 5, 1), GeometryError);
  CHECK_THROWS_AS(ThreatModel(4, 4, 0, 1), GeometryError);
  CHECK_THROWS_AS(ThreatModel(4, 4, 1, 1, 0), GeometryError);
  const ThreatModel t = ThreatModel(4, 7, 2, 3).transposed();
  CHECK(t.image_height() == 7);
  CHECK(t.patch_width() == 2);
}

TEST_CASE("apply_patch only changes the patch rectangle") {
  Rng rng(3);
  const ImageGrid x = random_image(8, 9, 3, rng);
  const ImageGrid p = random_image(8, 9, 3, rng);
  const Rect loc{2, 3, 3, 4};
  const ImageGrid y = apply_patch(x, p, loc);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 9; ++c)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(y.at(r, c, ch) == (loc.contains(r, c) ? p.at(r, c, ch) : x.at(r, c, ch)));
  CHECK_THROWS_AS(apply_patch(x, p, Rect{6, 0, 3, 1}), GeometryError);
}

TEST_CASE("masking zero-fills hidden pixels") {
  Rng rng(4);
  const ImageGrid x = random_image(5, 5, 1, rng);
  MaskGrid m(5, 5, true);
  m.set_visible(2, 2, false);
  const auto mi = apply_mask(x, m);
  CHECK(mi.pixels.at(2, 2, 0) == 0.0f);
  CHECK(mi.pixels.at(1, 2, 0) == x.at(1, 2, 0));
  CHECK_FALSE(covers(m, Rect{1, 1, 2, 2}));
  CHECK(covers(m, Rect{2, 2, 1, 1}));
}

TEST_CASE("square patch side from area fraction") {
  CHECK(square_patch_side(0.01, 512, 512) == 52);
  CHECK(square_patch_side(0.01, 100, 100) == 10);
  CHECK(square_patch_side(1.0, 10, 10) == 10);
  CHECK_THROWS_AS(square_patch_side(0.0, 10, 10), GeometryError);
  CHECK_THROWS_AS(square_patch_side(1.0, 10, 40), GeometryError);
}
