#pragma once

// Independent reference implementations used as test oracles, plus random
// model generators. Nothing here calls the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "teesplit/teesplit.hpp"

namespace teesplit::oracle {

inline Tensor random_tensor(const Shape& s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// ---------------------------------------------------------------------------
// SSIM: explicit 2-D Gaussian window, every valid placement, two-pass moments.

inline double ssim_oracle(const Tensor& a, const Tensor& b, std::size_t win = 11, double sigma = 1.5,
                          double k1 = 0.01, double k2 = 0.03, double L = 1.0) {
  const std::size_t C = a.rank() == 3 ? a.shape()[0] : 1;
  const std::size_t H = a.shape()[a.rank() - 2], W = a.shape()[a.rank() - 1];
  const double c1 = (k1 * L) * (k1 * L), c2 = (k2 * L) * (k2 * L);
  std::vector<double> w2(win * win);
  double wsum = 0;
  const double centre = (static_cast<double>(win) - 1.0) / 2.0;
  for (std::size_t y = 0; y < win; ++y)
    for (std::size_t x = 0; x < win; ++x) {
      const double dy = static_cast<double>(y) - centre, dx = static_cast<double>(x) - centre;
      w2[y * win + x] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
      wsum += w2[y * win + x];
    }
  for (double& v : w2) v /= wsum;

  double total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double* pa = a.raw() + c * H * W;
    const double* pb = b.raw() + c * H * W;
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + win <= H; ++i)
      for (std::size_t j = 0; j + win <= W; ++j) {
        double mx = 0, my = 0;
        for (std::size_t y = 0; y < win; ++y)
          for (std::size_t x = 0; x < win; ++x) {
            const double wt = w2[y * win + x];
            mx += wt * pa[(i + y) * W + j + x];
            my += wt * pb[(i + y) * W + j + x];
          }
        double vx = 0, vy = 0, cxy = 0;
        for (std::size_t y = 0; y < win; ++y)
          for (std::size_t x = 0; x < win; ++x) {
            const double wt = w2[y * win + x];
            const double dx = pa[(i + y) * W + j + x] - mx, dy = pb[(i + y) * W + j + x] - my;
            vx += wt * dx * dx;
            vy += wt * dy * dy;
            cxy += wt * dx * dy;
          }
        sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    total += sum / static_cast<double>(count);
  }
  return total / static_cast<double>(C);
}

// ---------------------------------------------------------------------------
// MACs: hand tabulation of the VGG-16 chain at 3x224x224.

inline std::uint64_t vgg16_macs_by_hand() {
  struct Conv {
    std::uint64_t in, out, hw;
    bool pooled;
  };
  const std::vector<Conv> convs{{3, 64, 224, false},   {64, 64, 224, true},    {64, 128, 112, false},
                                {128, 128, 112, true}, {128, 256, 56, false},  {256, 256, 56, false},
                                {256, 256, 56, true},  {256, 512, 28, false},  {512, 512, 28, false},
                                {512, 512, 28, true},  {512, 512, 14, false},  {512, 512, 14, false},
                                {512, 512, 14, true}};
  std::uint64_t total = 0;
  for (const auto& c : convs) {
    const std::uint64_t out_elems = c.out * c.hw * c.hw;
    total += out_elems * 9 * c.in;    // conv
    total += out_elems;               // relu
    if (c.pooled) total += out_elems / 4;  // 2x2 max-pool output
  }
  total += 512 * 7 * 7;                       // flatten
  total += 25088ull * 4096 + 4096;            // fc1 + relu
  total += 4096ull * 4096 + 4096;             // fc2 + relu
  total += 4096ull * 1000;                    // fc3
  return total;
}

// Conv-only MACs of stem + stage 1 of ResNet-50 at 3x224x224 plus the
// element counts of their BN/ReLU/pool/Add layers.
inline std::uint64_t resnet50_layer2_macs_by_hand() {
  std::uint64_t t = 0;
  const std::uint64_t stem = 64ull * 112 * 112;
  t += stem * 49 * 3 + stem * 2;   // 7x7 conv, bn, relu
  t += 64ull * 56 * 56;            // max-pool
  const std::uint64_t hw = 56 * 56;
  for (int k = 0; k < 3; ++k) {
    const std::uint64_t in = k == 0 ? 64 : 256;
    t += 64 * hw * in + 2 * 64 * hw;     // 1x1 conv, bn, relu
    t += 64 * hw * 9 * 64 + 2 * 64 * hw; // 3x3 conv, bn, relu
    t += 256 * hw * 64 + 256 * hw;       // 1x1 conv, bn
    if (k > 0) t += 256 * hw;            // add
    t += 256 * hw;                       // relu
  }
  return t;
}

// ---------------------------------------------------------------------------
// Random small models covering every layer kind.

enum class Motif { kConv, kDepthwise, kRelu, kSwish, kSigmoid, kBatchNorm, kMaxPool, kAvgPool, kResidual, kSqueeze };
inline constexpr int kMotifCount = 10;

struct RandomModelBuilder {
  std::mt19937_64& rng;
  std::vector<LayerSpec> layers;
  Shape shape;
  int unit = 0;

  LayerSpec& push(LayerKind kind, const std::string& tag) {
    LayerSpec l;
    l.kind = kind;
    l.name = tag + std::to_string(layers.size());
    l.unit = std::string(to_string(kind));
    l.unit_id = unit;
    layers.push_back(l);
    return layers.back();
  }
  // Shape after appending, computed through a throwaway graph.
  void refresh(const Shape& input) {
    ModelGraph g("probe", input, layers, {});
    shape = g.output_shape();
  }
  std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }
};

/// Random chain of a few motifs ending in an optional FC head; `force` is
/// always among the motifs so a sweep over seeds covers every kind.
inline ModelGraph random_small_model(std::uint64_t seed, Motif force) {
  std::mt19937_64 rng(seed);
  RandomModelBuilder b{rng, {}, {}, 0};
  const Shape input{b.pick(1, 3), b.pick(6, 8), b.pick(6, 8)};
  b.shape = input;
  std::vector<Motif> motifs{force};
  const std::size_t extra = b.pick(1, 3);
  for (std::size_t i = 0; i < extra; ++i) motifs.push_back(static_cast<Motif>(b.pick(0, kMotifCount - 1)));
  std::shuffle(motifs.begin(), motifs.end(), rng);
  // A parametric layer first so that pools see distinct values.
  motifs.insert(motifs.begin(), Motif::kConv);

  for (Motif m : motifs) {
    const std::size_t C = b.shape[0], H = b.shape[1];
    ++b.unit;
    switch (m) {
      case Motif::kConv: {
        auto& l = b.push(LayerKind::kConv2d, "conv");
        l.out_channels = b.pick(1, 3);
        l.kernel = H >= 4 ? (b.pick(0, 1) ? 3 : 1) : 1;
        l.padding = l.kernel == 3 ? b.pick(0, 1) : 0;
        l.stride = H >= 6 ? b.pick(1, 2) : 1;
        break;
      }
      case Motif::kDepthwise: {
        auto& l = b.push(LayerKind::kDepthwiseConv2d, "dw");
        l.kernel = 3;
        l.padding = 1;
        l.stride = 1;
        break;
      }
      case Motif::kRelu: b.push(LayerKind::kReLU, "relu"); break;
      case Motif::kSwish: b.push(LayerKind::kSwish, "swish"); break;
      case Motif::kSigmoid: b.push(LayerKind::kSigmoid, "sigmoid"); break;
      case Motif::kBatchNorm: b.push(LayerKind::kBatchNormAffine, "bn"); break;
      case Motif::kMaxPool:
      case Motif::kAvgPool: {
        if (H < 2) break;
        auto& l = b.push(m == Motif::kMaxPool ? LayerKind::kMaxPool : LayerKind::kAvgPool, "pool");
        if (H >= 4 && b.pick(0, 1)) {
          l.kernel = 3;
          l.stride = 1;
          l.padding = 1;
        } else {
          l.kernel = 2;
          l.stride = 2;
        }
        break;
      }
      case Motif::kResidual: {
        const int src = static_cast<int>(b.layers.size()) - 1;
        auto& c = b.push(LayerKind::kConv2d, "res_conv");
        c.out_channels = C;
        c.kernel = 3;
        c.padding = 1;
        b.push(LayerKind::kReLU, "res_relu");
        b.push(LayerKind::kAdd, "res_add").source = src;
        break;
      }
      case Motif::kSqueeze: {
        const int src = static_cast<int>(b.layers.size()) - 1;
        b.push(LayerKind::kGlobalAvgPool, "se_pool");
        b.push(LayerKind::kFullyConnected, "se_fc1").units = std::max<std::size_t>(1, C / 2);
        b.push(LayerKind::kSwish, "se_swish");
        b.push(LayerKind::kFullyConnected, "se_fc2").units = C;
        b.push(LayerKind::kSigmoid, "se_gate");
        b.push(LayerKind::kChannelScale, "se_scale").source = src;
        break;
      }
    }
    b.refresh(input);
  }
  ++b.unit;
  if (b.pick(0, 1)) {
    b.push(LayerKind::kFlatten, "flatten");
    b.push(LayerKind::kFullyConnected, "fc").units = b.pick(2, 5);
  } else {
    b.push(LayerKind::kGlobalAvgPool, "gap");
    b.push(LayerKind::kFullyConnected, "fc").units = b.pick(2, 5);
  }
  const std::size_t n = b.layers.size();
  return ModelGraph("random" + std::to_string(seed), input, std::move(b.layers), {{"end", n}});
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

/// Piecewise-linear regime of x: the sign of every ReLU input and the
/// argmax of every max-pool window, recomputed with plain loops.
inline std::vector<long> regime(const Network& net, const Tensor& x, double margin, bool& near_kink) {
  const ForwardTape tape = record_tape(net, x, net.graph().layers().size());
  std::vector<long> r;
  for (std::size_t i = 0; i < net.graph().layers().size(); ++i) {
    const LayerSpec& l = net.graph().layers()[i];
    const Tensor& in = tape.activations[i];
    if (l.kind == LayerKind::kReLU) {
      for (double v : in.data()) {
        r.push_back(v > 0 ? 1 : 0);
        if (v != 0 && std::abs(v) < margin) near_kink = true;
      }
    } else if (l.kind == LayerKind::kMaxPool) {
      const std::size_t C = in.shape()[0], H = in.shape()[1], W = in.shape()[2];
      const std::size_t Ho = l.output_shape[1], Wo = l.output_shape[2];
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oh = 0; oh < Ho; ++oh)
          for (std::size_t ow = 0; ow < Wo; ++ow) {
            long best = -1;
            double best_v = 0, second = -1e300;
            for (std::size_t kh = 0; kh < l.kernel; ++kh)
              for (std::size_t kw = 0; kw < l.kernel; ++kw) {
                const long ih = static_cast<long>(oh * l.stride + kh) - static_cast<long>(l.padding);
                const long iw = static_cast<long>(ow * l.stride + kw) - static_cast<long>(l.padding);
                if (ih < 0 || iw < 0 || ih >= static_cast<long>(H) || iw >= static_cast<long>(W)) continue;
                const double v = in.at(c, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw));
                if (best < 0 || v > best_v) {
                  second = best < 0 ? second : best_v;
                  best = ih * static_cast<long>(W) + iw;
                  best_v = v;
                } else {
                  second = std::max(second, v);
                }
              }
            r.push_back(best);
            // Exact ties among constant values (typically ReLU zeros) carry no
            // gradient either way; only distinct near-ties are kinks.
            if (best_v != second && best_v - second < margin) near_kink = true;
          }
    }
  }
  return r;
}

struct GradientCheck {
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double worst = 0.0;
};

/// Compares input_gradient against central differences of <F(x), cot> for
/// every input coordinate; coordinates whose piecewise regime changes
/// within +-h (or sits within `margin` of a kink) are skipped.
inline GradientCheck check_gradient(const Network& net, const Tensor& x, const Tensor& cot, double h = 1e-5,
                                    double margin = 1e-6, double floor = 1e-4) {
  const std::string label = net.graph().partition_points().back().label;
  const Tensor g = input_gradient(net, label, x, cot);
  auto objective = [&](const Tensor& in) {
    const Tensor y = forward(net, in);
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<long double>(y[i]) * cot[i];
    return static_cast<double>(s);
  };
  GradientCheck res;
  bool base_kink = false;
  const auto base = regime(net, x, margin, base_kink);
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    bool kp = false, km = false;
    if (regime(net, xp, margin, kp) != base || regime(net, xm, margin, km) != base || kp || km) {
      ++res.excluded;
      continue;
    }
    const double fd = (objective(xp) - objective(xm)) / (2 * h);
    const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), floor});
    res.worst = std::max(res.worst, rel);
    ++res.checked;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic plan requests.

inline PlanRequest random_plan_request(std::uint64_t seed, std::size_t n_points) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlanRequest r;
  r.model_name = "synthetic" + std::to_string(seed);
  r.threshold = 0.1 + 0.3 * u(rng);
  r.slack = u(rng) < 0.3 ? 0.0 : 0.1 * u(rng);
  r.profile.model_name = r.model_name;
  r.profile.full_enclave_seconds = 1.0 + 4.0 * u(rng);
  r.profile.full_accelerator_seconds = 0.1 + 0.5 * u(rng);
  r.profile.transfer = {0.01 * u(rng), 1e-8 * u(rng), std::nullopt, std::nullopt};
  r.privacy.model_name = r.model_name;
  double prefix = 0.0;
  double score = 0.3 + 0.6 * u(rng);
  for (std::size_t i = 0; i < n_points; ++i) {
    const std::string label = "P" + std::to_string(i + 1);
    PartitionAssignment a;
    a.boundary_label = label;
    a.boundary = i + 1;
    a.exposed_tensor_bytes = static_cast<std::uint64_t>(1e6 * u(rng));
    r.partitions.push_back(a);
    prefix += 0.05 + r.profile.full_enclave_seconds / static_cast<double>(n_points) * u(rng);
    // Some draws quantise times so that ties occur.
    const double suffix = r.profile.full_accelerator_seconds * u(rng);
    PointCost pc{label, prefix, seed % 3 == 0 ? std::round(suffix * 10) / 10 : suffix};
    if (seed % 3 == 0) pc.enclave_prefix_seconds = std::round(prefix * 10) / 10 + 0.1;
    r.profile.per_point.push_back(pc);
    score = std::clamp(score + (u(rng) - 0.65) * 0.25, -0.05, 1.0);
    PrivacyPoint pp;
    pp.boundary_label = label;
    pp.boundary = i + 1;
    pp.mean_ssim = seed % 5 == 0 ? std::round(score * 20) / 20 : score;
    pp.n_samples = 20;
    r.privacy.per_point.push_back(pp);
  }
  // Coherent profile: no partition is slower than running everything in
  // the enclave.
  for (const auto& a : r.partitions)
    r.profile.full_enclave_seconds = std::max(r.profile.full_enclave_seconds, predict(r.profile, a).total_seconds);
  return r;
}

}  // namespace teesplit::oracle
