#include "psim/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace psim {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error(path + ": " + why);
}

// Next whitespace-delimited header token, skipping '#' comments to end of line.
std::string header_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int header_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = header_token(in);
  if (tok.empty()) fail(path, std::string("truncated header: missing ") + what);
  try {
    size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(path, std::string("bad header ") + what + " '" + tok + "'");
  }
}

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open temporary file for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(path, "short write");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(path, "rename failed: " + ec.message());
}

std::string encode(const ImageRecord& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_image: channels must be 1 or 3, got " +
                                std::to_string(img.channels));
  if (img.width <= 0 || img.height <= 0 ||
      img.pixels.size() !=
          static_cast<size_t>(img.width) * static_cast<size_t>(img.height) *
              static_cast<size_t>(img.channels))
    throw std::invalid_argument("write_image: inconsistent image record");
  std::string out = (img.channels == 3 ? "P6\n" : "P5\n");
  out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) out.push_back(static_cast<char>(quantize_byte(v)));
  return out;
}

}  // namespace

unsigned char quantize_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(c * 255.0 + 0.5));
}

ImageRecord load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const std::string magic = header_token(in);
  if (magic != "P6" && magic != "P5") fail(path, "wrong magic '" + magic + "' (want P6 or P5)");
  ImageRecord img;
  img.channels = magic == "P6" ? 3 : 1;
  img.width = header_int(in, path, "width");
  img.height = header_int(in, path, "height");
  const int maxval = header_int(in, path, "maxval");
  if (maxval != 255) fail(path, "unsupported maxval " + std::to_string(maxval) + " (want 255)");
  // Exactly one whitespace byte separates the header from the raster.
  const size_t count = static_cast<size_t>(img.width) * static_cast<size_t>(img.height) *
                       static_cast<size_t>(img.channels);
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<size_t>(in.gcount()) != count) fail(path, "truncated pixel data");
  img.pixels.resize(count);
  for (size_t i = 0; i < count; ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

void write_image(const ImageRecord& img, const std::string& path) {
  atomic_write(path, encode(img));
}

std::vector<ImageRecord> load_dataset(const std::string& dir, int expected_w, int expected_h) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(dir, "not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".ppm" || ext == ".pgm") names.push_back(entry.path().string());
  }
  if (names.empty()) fail(dir, "no .ppm/.pgm images found");
  std::sort(names.begin(), names.end());
  std::vector<ImageRecord> out;
  out.reserve(names.size());
  for (const std::string& name : names) {
    ImageRecord img = load_image(name);
    if (img.width != expected_w || img.height != expected_h)
      fail(name, "size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     " does not match expected " + std::to_string(expected_w) + "x" +
                     std::to_string(expected_h));
    out.push_back(std::move(img));
  }
  return out;
}

void write_grid(const std::vector<ImageRecord>& images, int cols, const std::string& path) {
  if (images.empty()) throw std::invalid_argument("write_grid: no images");
  if (cols <= 0) throw std::invalid_argument("write_grid: cols must be positive");
  const int w = images[0].width, h = images[0].height, ch = images[0].channels;
  for (const ImageRecord& img : images)
    if (img.width != w || img.height != h || img.channels != ch)
      throw std::invalid_argument("write_grid: images differ in size or channels");

  const int n = static_cast<int>(images.size());
  const int rows = (n + cols - 1) / cols;
  constexpr int kGutter = 2;
  ImageRecord canvas;
  canvas.width = cols * w + kGutter * (cols - 1);
  canvas.height = rows * h + kGutter * (rows - 1);
  canvas.channels = ch;
  canvas.pixels.assign(static_cast<size_t>(canvas.width) * canvas.height * ch, 0.0);
  for (int i = 0; i < n; ++i) {
    const int r = i / cols, c = i % cols;
    const int y0 = r * (h + kGutter), x0 = c * (w + kGutter);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int k = 0; k < ch; ++k) canvas.at(y0 + y, x0 + x, k) = images[i].at(y, x, k);
  }
  write_image(canvas, path);
}

Tensor to_tensor(const ImageRecord& img) {
  Tensor t({img.channels, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        t[(static_cast<int64_t>(c) * img.height + y) * img.width + x] = img.at(y, x, c);
  return t;
}

ImageRecord to_record(const Tensor& chw) {
  if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3))
    throw std::invalid_argument("to_record: want {C,H,W} with C in {1,3}, got " +
                                shape_str(chw.shape));
  ImageRecord img;
  img.channels = chw.dim(0);
  img.height = chw.dim(1);
  img.width = chw.dim(2);
  img.pixels.resize(static_cast<size_t>(img.channels) * img.height * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        img.at(y, x, c) = chw[(static_cast<int64_t>(c) * img.height + y) * img.width + x];
  return img;
}

Tensor batch_tensor(const std::vector<ImageRecord>& images) {
  if (images.empty()) throw std::invalid_argument("batch_tensor: no images");
  const int ch = images[0].channels, h = images[0].height, w = images[0].width;
  Tensor out({static_cast<int>(images.size()), ch, h, w});
  const int64_t per = static_cast<int64_t>(ch) * h * w;
  for (size_t i = 0; i < images.size(); ++i) {
    const Tensor t = to_tensor(images[i]);
    if (t.dim(0) != ch || t.dim(1) != h || t.dim(2) != w)
      throw std::invalid_argument("batch_tensor: images differ in size");
    std::copy(t.data.begin(), t.data.end(),
              out.data.begin() + static_cast<int64_t>(i) * per);
  }
  return out;
}

std::vector<ImageRecord> split_batch(const Tensor& batch) {
  if (batch.rank() != 4)
    throw std::invalid_argument("split_batch: want {N,C,H,W}, got " + shape_str(batch.shape));
  std::vector<ImageRecord> out;
  const int64_t per = static_cast<int64_t>(batch.dim(1)) * batch.dim(2) * batch.dim(3);
  for (int n = 0; n < batch.dim(0); ++n) {
    Tensor chw({batch.dim(1), batch.dim(2), batch.dim(3)});
    std::copy(batch.data.begin() + n * per, batch.data.begin() + (n + 1) * per,
              chw.data.begin());
    out.push_back(to_record(chw));
  }
  return out;
}

}  // namespace psim
