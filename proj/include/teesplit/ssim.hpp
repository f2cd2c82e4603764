#pragma once

#include <cmath>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/tensor.hpp"

namespace teesplit {

struct SsimParams {
  std::size_t window_size = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

  void validate() const {
    if (window_size == 0 || window_size % 2 == 0)
      throw InvalidArgument("SSIM window size must be odd and positive");
    if (!(gaussian_sigma > 0) || !(k1 > 0) || !(k2 > 0) || !(dynamic_range > 0))
      throw InvalidArgument("SSIM sigma, k1, k2 and dynamic range must be positive");
  }
};

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double r = static_cast<double>(size / 2);
  double sum = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - r;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

namespace detail {

// 'valid' separable filtering of one H x W plane.
inline std::vector<double> filter_valid(const double* plane, std::size_t H, std::size_t W,
                                        const std::vector<double>& taps) {
  const std::size_t n = taps.size(), Ho = H - n + 1, Wo = W - n + 1;
  std::vector<double> rows(H * Wo, 0.0), out(Ho * Wo, 0.0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < Wo; ++w) {
      double acc = 0;
      for (std::size_t t = 0; t < n; ++t) acc += taps[t] * plane[h * W + w + t];
      rows[h * Wo + w] = acc;
    }
  for (std::size_t h = 0; h < Ho; ++h)
    for (std::size_t w = 0; w < Wo; ++w) {
      double acc = 0;
      for (std::size_t t = 0; t < n; ++t) acc += taps[t] * rows[(h + t) * Wo + w];
      out[h * Wo + w] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean structural similarity over all fully-contained Gaussian windows,
/// averaged over channels. Accepts HxW or CxHxW tensors. Not clamped: the
/// standard formula can go negative for anti-correlated images.
inline double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {}) {
  params.validate();
  if (a.shape() != b.shape())
    throw ShapeError("SSIM inputs differ in shape: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  if (a.rank() != 2 && a.rank() != 3) throw ShapeError("SSIM expects HxW or CxHxW images");
  const std::size_t C = a.rank() == 3 ? a.shape()[0] : 1;
  const std::size_t H = a.shape()[a.rank() - 2], W = a.shape()[a.rank() - 1];
  const std::size_t n = params.window_size;
  if (H < n || W < n)
    throw ShapeError("image " + shape_to_string(a.shape()) + " smaller than SSIM window " +
                     std::to_string(n));

  const auto taps = gaussian_taps(n, params.gaussian_sigma);
  const double c1 = params.c1(), c2 = params.c2();
  const std::size_t plane = H * W;
  std::vector<double> xx(plane), yy(plane), xy(plane);
  double total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double* x = a.raw() + c * plane;
    const double* y = b.raw() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, H, W, taps);
    const auto my = detail::filter_valid(y, H, W, taps);
    const auto exx = detail::filter_valid(xx.data(), H, W, taps);
    const auto eyy = detail::filter_valid(yy.data(), H, W, taps);
    const auto exy = detail::filter_valid(xy.data(), H, W, taps);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cov = exy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(C);
}

}  // namespace teesplit
