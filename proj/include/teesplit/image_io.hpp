#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/tensor.hpp"

namespace teesplit {

namespace detail {

inline std::string next_pnm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace detail

/// Reads an 8-bit PGM (P2/P5) or PPM (P3/P6) image as a CxHxW tensor with
/// values scaled to [0, 1].
inline Tensor read_pnm(std::istream& in) {
  const std::string magic = detail::next_pnm_token(in);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    throw InvalidArgument("not a PGM/PPM image (magic '" + magic + "')");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(detail::next_pnm_token(in));
    h = std::stoul(detail::next_pnm_token(in));
    maxval = std::stoul(detail::next_pnm_token(in));
  } catch (const std::exception&) {
    throw InvalidArgument("malformed PGM/PPM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255)
    throw InvalidArgument("only 8-bit PGM/PPM images are supported");
  const std::size_t channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  const bool binary = magic == "P5" || magic == "P6";
  std::vector<double> interleaved(w * h * channels);
  for (auto& v : interleaved) {
    int value = 0;
    if (binary) {
      char ch;
      if (!in.get(ch)) throw InvalidArgument("truncated PGM/PPM pixel data");
      value = static_cast<unsigned char>(ch);
    } else {
      const std::string tok = detail::next_pnm_token(in);
      if (tok.empty()) throw InvalidArgument("truncated PGM/PPM pixel data");
      value = std::stoi(tok);
    }
    v = static_cast<double>(value) / static_cast<double>(maxval);
  }
  Tensor t(Shape{channels, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c) t.at(c, y, x) = interleaved[(y * w + x) * channels + c];
  return t;
}

/// Writes a 1- or 3-channel image (values clamped to [0, 1]) as binary PGM/PPM.
inline void write_pnm(std::ostream& out, const Tensor& img) {
  if (img.rank() != 3 || (img.shape()[0] != 1 && img.shape()[0] != 3))
    throw ShapeError("PNM output needs a 1xHxW or 3xHxW tensor");
  const std::size_t c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
  out << (c == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(img.at(ch, y, x), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
}

/// Loads one image: .pgm/.ppm/.pnm as 8-bit images, anything else as the flat
/// binary tensor format.
inline Tensor load_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError("cannot open image " + path.string());
    return read_pnm(in);
  }
  return load_tensor_file(path.string());
}

/// Every image file in a directory, in lexicographic filename order.
inline std::vector<Tensor> load_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw LookupError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".bin" || ext == ".tensor")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw LookupError("no images in " + dir.string());
  std::vector<Tensor> out;
  for (const auto& f : files) out.push_back(load_image(f));
  return out;
}

/// Smooth, structured test image in [0, 1]: a per-channel linear ramp plus a
/// few Gaussian blobs and one oriented stripe pattern.
inline Tensor synthetic_image(const Shape& shape, std::uint64_t seed) {
  if (shape.size() != 3) throw ShapeError("synthetic images are CxHxW");
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t C = shape[0], H = shape[1], W = shape[2];
  Tensor img(shape);
  struct Blob {
    double cy, cx, r, amp;
  };
  std::vector<Blob> blobs(3);
  for (auto& b : blobs) b = {u(rng) * H, u(rng) * W, (0.15 + 0.25 * u(rng)) * std::max(H, W), u(rng) - 0.3};
  const double freq = 0.2 + 0.6 * u(rng), angle = u(rng) * 3.14159265358979;
  for (std::size_t c = 0; c < C; ++c) {
    const double base = 0.2 + 0.4 * u(rng), gy = (u(rng) - 0.5) * 0.5, gx = (u(rng) - 0.5) * 0.5;
    const double stripe = 0.15 * u(rng);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double fy = static_cast<double>(y) / static_cast<double>(H);
        const double fx = static_cast<double>(x) / static_cast<double>(W);
        double v = base + gy * fy + gx * fx;
        for (const auto& b : blobs) {
          const double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
          v += b.amp * std::exp(-(dy * dy + dx * dx) / (2 * b.r * b.r));
        }
        v += stripe * std::sin(freq * (std::cos(angle) * static_cast<double>(x) +
                                       std::sin(angle) * static_cast<double>(y)));
        img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
  }
  return img;
}

}  // namespace teesplit
