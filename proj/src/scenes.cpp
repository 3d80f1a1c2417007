#include "patchcert/scenes.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "patchcert/errors.hpp"

namespace patchcert {

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw Error("empty integer range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t v = 0;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<int>(v % span);
}

float Rng::unit() {
  return static_cast<float>(engine_() >> 40) / static_cast<float>((1ull << 24) - 1);
}

ImageGrid random_image(int height, int width, int channels, Rng& rng) {
  std::vector<float> data(static_cast<std::size_t>(height) * width * channels);
  for (auto& v : data) v = rng.intensity();
  return ImageGrid(height, width, channels, std::move(data));
}

ImageGrid synthetic_scene(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  ImageGrid img(height, width, 3);
  const auto paint = [&](int top, int left, int h, int w, int dominant) {
    const float strong = 0.75f + 0.25f * static_cast<float>(rng.uniform_int(0, 4)) / 4.0f;
    const float weak = 0.25f * static_cast<float>(rng.uniform_int(0, 4)) / 4.0f;
    for (int r = top; r < std::min(height, top + h); ++r)
      for (int c = left; c < std::min(width, left + w); ++c)
        for (int ch = 0; ch < 3; ++ch) img.set(r, c, ch, ch == dominant ? strong : weak);
  };

  paint(0, 0, height, width, rng.uniform_int(0, 2));
  const int regions = rng.uniform_int(2, 4);
  for (int i = 0; i < regions; ++i) {
    const int h = rng.uniform_int(std::max(2, height / 4), std::max(2, height * 3 / 4));
    const int w = rng.uniform_int(std::max(2, width / 4), std::max(2, width * 3 / 4));
    const int top = rng.uniform_int(0, std::max(0, height - h));
    const int left = rng.uniform_int(0, std::max(0, width - w));
    paint(top, left, h, w, rng.uniform_int(0, 2));
  }
  return img;
}

}  // namespace patchcert
