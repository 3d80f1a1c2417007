#pragma once

#include <cstdint>
#include <random>

#include "patchcert/grid.hpp"

namespace patchcert {

/// Seeded generator with distribution helpers that do not depend on the
/// standard library's (implementation-defined) distributions, so outputs are
/// stable across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  /// Uniform in [0, 1].
  float unit();
  /// Uniform 8-bit quantized intensity k / 255.
  float intensity() { return static_cast<float>(uniform_int(0, 255)) / 255.0f; }

 private:
  std::mt19937_64 engine_;
};

/// Random image with 8-bit quantized intensities.
ImageGrid random_image(int height, int width, int channels, Rng& rng);

/// Synthetic RGB scene: a saturated background with a few axis-aligned
/// rectangles of saturated red/green/blue, lightly jittered. Deterministic
/// in (height, width, seed).
ImageGrid synthetic_scene(int height, int width, std::uint64_t seed);

}  // namespace patchcert
