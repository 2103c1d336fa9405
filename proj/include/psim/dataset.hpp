#pragma once

// Bundled generator of small structured texture images (stripes, checkers,
// blobs) with class labels, plus crop helpers. Textures have crisp edges so
// reconstruction blur is visible even at tiny image sizes.

#include <cstdint>
#include <vector>

#include "psim/rng.hpp"
#include "psim/tensor.hpp"

namespace psim {

struct TextureSet {
  std::vector<Tensor> images;  // each {C, size, size}, values in [0, 1]
  std::vector<int> labels;     // 0 stripes, 1 checker, 2 blobs
};

// Deterministic textures cycling through the three kinds.
TextureSet make_textures(int count, int size, int channels, uint64_t seed);

// Crop at an offset drawn from rng (y first, then x).
Tensor random_crop(const Tensor& chw, int size, RngStream& rng);

// Deterministic centered crop.
Tensor center_crop(const Tensor& chw, int size);

}  // namespace psim
