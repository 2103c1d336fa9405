#include "psim/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace psim {

namespace {

struct Color {
  double v[3];
};

Color draw_color(RngStream& rng, int channels) {
  Color c{};
  c.v[0] = rng.next_double();
  c.v[1] = channels == 1 ? c.v[0] : rng.next_double();
  c.v[2] = channels == 1 ? c.v[0] : rng.next_double();
  return c;
}

double color_dist(const Color& a, const Color& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  return std::sqrt(s);
}

// Two colors far enough apart that the pattern stays visible.
std::pair<Color, Color> contrasting_pair(RngStream& rng, int channels) {
  Color a = draw_color(rng, channels);
  Color b = draw_color(rng, channels);
  for (int tries = 0; tries < 16 && color_dist(a, b) < 0.4; ++tries)
    b = draw_color(rng, channels);
  if (color_dist(a, b) < 0.4) {  // force contrast as a last resort
    for (int i = 0; i < 3; ++i) b.v[i] = a.v[i] > 0.5 ? a.v[i] - 0.5 : a.v[i] + 0.5;
  }
  return {a, b};
}

void paint(Tensor& img, int y, int x, const Color& c) {
  const int ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  for (int k = 0; k < ch; ++k)
    img[(static_cast<int64_t>(k) * h + y) * w + x] = c.v[k];
}

Tensor stripes(int size, int channels, RngStream& rng) {
  Tensor img({channels, size, size});
  auto [a, b] = contrasting_pair(rng, channels);
  const bool horizontal = rng.next_below(2) == 0;
  const int width = 2 + static_cast<int>(rng.next_below(4));  // 2..5 px
  const int phase = static_cast<int>(rng.next_below(static_cast<uint64_t>(2 * width)));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int coord = horizontal ? y : x;
      paint(img, y, x, ((coord + phase) / width) % 2 == 0 ? a : b);
    }
  return img;
}

Tensor checker(int size, int channels, RngStream& rng) {
  Tensor img({channels, size, size});
  auto [a, b] = contrasting_pair(rng, channels);
  const int cell = 2 + static_cast<int>(rng.next_below(5));  // 2..6 px
  const int py = static_cast<int>(rng.next_below(static_cast<uint64_t>(cell)));
  const int px = static_cast<int>(rng.next_below(static_cast<uint64_t>(cell)));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      paint(img, y, x, (((y + py) / cell + (x + px) / cell) % 2 == 0) ? a : b);
  return img;
}

Tensor blobs(int size, int channels, RngStream& rng) {
  Tensor img({channels, size, size});
  const Color bg = draw_color(rng, channels);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) paint(img, y, x, bg);
  const int count = 3 + static_cast<int>(rng.next_below(4));  // 3..6 discs
  for (int i = 0; i < count; ++i) {
    const Color c = draw_color(rng, channels);
    const double cy = rng.next_double() * size;
    const double cx = rng.next_double() * size;
    const double r = size * (0.08 + 0.12 * rng.next_double());
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
        if (dy * dy + dx * dx <= r * r) paint(img, y, x, c);
      }
  }
  return img;
}

}  // namespace

TextureSet make_textures(int count, int size, int channels, uint64_t seed) {
  if (count <= 0 || size <= 0) throw std::invalid_argument("make_textures: bad count or size");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("make_textures: channels must be 1 or 3");
  TextureSet set;
  RngStream rng = RngStream::derive(seed, "textures");
  for (int i = 0; i < count; ++i) {
    const int kind = i % 3;
    switch (kind) {
      case 0: set.images.push_back(stripes(size, channels, rng)); break;
      case 1: set.images.push_back(checker(size, channels, rng)); break;
      default: set.images.push_back(blobs(size, channels, rng)); break;
    }
    set.labels.push_back(kind);
  }
  return set;
}

Tensor random_crop(const Tensor& chw, int size, RngStream& rng) {
  if (chw.rank() != 3)
    throw std::invalid_argument("random_crop: want {C,H,W}, got " + shape_str(chw.shape));
  const int h = chw.dim(1), w = chw.dim(2);
  if (size <= 0 || size > h || size > w)
    throw std::invalid_argument("random_crop: crop " + std::to_string(size) +
                                " does not fit in " + shape_str(chw.shape));
  const int y0 = static_cast<int>(rng.next_below(static_cast<uint64_t>(h - size + 1)));
  const int x0 = static_cast<int>(rng.next_below(static_cast<uint64_t>(w - size + 1)));
  Tensor out({chw.dim(0), size, size});
  for (int c = 0; c < chw.dim(0); ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        out[(static_cast<int64_t>(c) * size + y) * size + x] =
            chw[(static_cast<int64_t>(c) * h + y0 + y) * w + x0 + x];
  return out;
}

Tensor center_crop(const Tensor& chw, int size) {
  if (chw.rank() != 3)
    throw std::invalid_argument("center_crop: want {C,H,W}, got " + shape_str(chw.shape));
  const int h = chw.dim(1), w = chw.dim(2);
  if (size <= 0 || size > h || size > w)
    throw std::invalid_argument("center_crop: crop " + std::to_string(size) +
                                " does not fit in " + shape_str(chw.shape));
  const int y0 = (h - size) / 2, x0 = (w - size) / 2;
  Tensor out({chw.dim(0), size, size});
  for (int c = 0; c < chw.dim(0); ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        out[(static_cast<int64_t>(c) * size + y) * size + x] =
            chw[(static_cast<int64_t>(c) * h + y0 + y) * w + x0 + x];
  return out;
}

}  // namespace psim
