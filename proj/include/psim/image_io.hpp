#pragma once

// Binary PPM (P6) / PGM (P5) image I/O, grid rendering, and conversions
// between images and N x C x H x W tensors. Pixels live in [0, 1].

#include <string>
#include <vector>

#include "psim/tensor.hpp"

namespace psim {

struct ImageRecord {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (gray) or 3 (rgb)
  std::vector<double> pixels;  // row-major, channel-interleaved, values in [0, 1]

  double& at(int y, int x, int c) {
    return pixels[static_cast<size_t>((static_cast<int64_t>(y) * width + x) * channels + c)];
  }
  double at(int y, int x, int c) const {
    return pixels[static_cast<size_t>((static_cast<int64_t>(y) * width + x) * channels + c)];
  }
};

// Clamp to [0, 1] and quantize round-half-up to a byte.
unsigned char quantize_byte(double v);

// Reads a binary P6/P5 file with maxval 255. Errors name the file.
ImageRecord load_image(const std::string& path);

// Writes P6 (3 channels) or P5 (1 channel), atomically (temp file + rename).
void write_image(const ImageRecord& img, const std::string& path);

// Loads every *.ppm / *.pgm in the directory in sorted filename order.
// Images must all match the expected size exactly; no silent resampling.
std::vector<ImageRecord> load_dataset(const std::string& dir, int expected_w, int expected_h);

// Tiles images row-major with a 2-pixel black gutter into one P6/P5 file.
void write_grid(const std::vector<ImageRecord>& images, int cols, const std::string& path);

// {C, H, W} tensor from an image and back. Values pass through unclamped.
Tensor to_tensor(const ImageRecord& img);
ImageRecord to_record(const Tensor& chw);

// Stacks equally-sized images into an {N, C, H, W} batch.
Tensor batch_tensor(const std::vector<ImageRecord>& images);

// Splits an {N, C, H, W} batch into N images.
std::vector<ImageRecord> split_batch(const Tensor& batch);

}  // namespace psim
