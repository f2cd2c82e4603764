#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/model_graph.hpp"

namespace teesplit {

/// Appends layers to a chain while tracking unit ids and partition labels.
class ChainBuilder {
 public:
  void begin_unit(std::string unit) {
    unit_ = std::move(unit);
    ++unit_id_;
  }

  int add(LayerSpec l) {
    l.unit = unit_;
    l.unit_id = unit_id_;
    layers_.push_back(std::move(l));
    return last();
  }

  static LayerSpec named(std::string name, LayerKind kind) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = kind;
    return l;
  }

  int last() const { return static_cast<int>(layers_.size()) - 1; }

  int conv(std::string name, std::size_t out, std::size_t k, std::size_t stride,
           std::size_t pad) {
    LayerSpec l = named(std::move(name), LayerKind::kConv2d);
    l.out_channels = out;
    l.kernel = k;
    l.stride = stride;
    l.padding = pad;
    return add(std::move(l));
  }
  int depthwise(std::string name, std::size_t k, std::size_t stride, std::size_t pad) {
    LayerSpec l = named(std::move(name), LayerKind::kDepthwiseConv2d);
    l.kernel = k;
    l.stride = stride;
    l.padding = pad;
    return add(std::move(l));
  }
  int pool(std::string name, LayerKind kind, std::size_t k, std::size_t stride,
           std::size_t pad = 0) {
    LayerSpec l = named(std::move(name), kind);
    l.kernel = k;
    l.stride = stride;
    l.padding = pad;
    return add(std::move(l));
  }
  int fc(std::string name, std::size_t units) {
    LayerSpec l = named(std::move(name), LayerKind::kFullyConnected);
    l.units = units;
    return add(std::move(l));
  }
  int simple(std::string name, LayerKind kind) {
    return add(named(std::move(name), kind));
  }
  int with_source(std::string name, LayerKind kind, int source) {
    LayerSpec l = named(std::move(name), kind);
    l.source = source;
    return add(std::move(l));
  }

  void mark(std::string label) {
    points_.push_back({std::move(label), layers_.size()});
  }

  ModelGraph finish(std::string name, Shape input_shape) && {
    return ModelGraph(std::move(name), std::move(input_shape), std::move(layers_),
                      std::move(points_));
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<PartitionPoint> points_;
  std::string unit_;
  int unit_id_ = -1;
};

namespace detail {

inline std::string layer_label(int i) { return "Layer " + std::to_string(i); }

// Boundaries follow each conv unit; a max-pool that trails a conv belongs to
// that conv's unit and therefore to the enclave side.
inline ModelGraph build_vgg16(const Shape& input) {
  constexpr std::array<int, 18> cfg{64, 64, 0, 128, 128, 0, 256, 256, 256, 0,
                                    512, 512, 512, 0, 512, 512, 512, 0};
  ChainBuilder b;
  int conv_index = 0;
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (cfg[i] == 0) continue;
    ++conv_index;
    const std::string n = "conv" + std::to_string(conv_index);
    b.begin_unit("conv");
    b.conv(n, static_cast<std::size_t>(cfg[i]), 3, 1, 1);
    b.simple(n + "/relu", LayerKind::kReLU);
    if (i + 1 < cfg.size() && cfg[i + 1] == 0)
      b.pool(n + "/pool", LayerKind::kMaxPool, 2, 2);
    b.mark(layer_label(conv_index));
  }
  b.begin_unit("FC");
  b.simple("flatten", LayerKind::kFlatten);
  b.fc("fc1", 4096);
  b.simple("fc1/relu", LayerKind::kReLU);
  b.begin_unit("FC");
  b.fc("fc2", 4096);
  b.simple("fc2/relu", LayerKind::kReLU);
  b.begin_unit("FC");
  b.fc("fc3", 1000);
  return std::move(b).finish("vgg16", input);
}

// Bottleneck stages of 3, 4, 6, 3 blocks. The first block of every stage
// changes the tensor shape and carries no identity shortcut (there is no
// projection branch in a linear chain), which keeps the conv census at 49.
inline ModelGraph build_resnet50(const Shape& input) {
  ChainBuilder b;
  b.begin_unit("conv");
  b.conv("stem/conv", 64, 7, 2, 3);
  b.simple("stem/bn", LayerKind::kBatchNormAffine);
  b.simple("stem/relu", LayerKind::kReLU);
  b.pool("stem/pool", LayerKind::kMaxPool, 3, 2, 1);
  b.mark(detail::layer_label(1));

  struct Stage {
    std::size_t mid, blocks, stride;
  };
  constexpr std::array<Stage, 4> stages{{{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}}};
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto [mid, blocks, stride] = stages[s];
    for (std::size_t k = 0; k < blocks; ++k) {
      const std::string n = "stage" + std::to_string(s + 1) + "_" + std::to_string(k + 1);
      const int block_in = b.last();
      b.begin_unit("conv");
      b.conv(n + "/conv1", mid, 1, 1, 0);
      b.simple(n + "/bn1", LayerKind::kBatchNormAffine);
      b.simple(n + "/relu1", LayerKind::kReLU);
      b.begin_unit("conv");
      b.conv(n + "/conv2", mid, 3, k == 0 ? stride : 1, 1);
      b.simple(n + "/bn2", LayerKind::kBatchNormAffine);
      b.simple(n + "/relu2", LayerKind::kReLU);
      b.begin_unit("conv");
      b.conv(n + "/conv3", mid * 4, 1, 1, 0);
      b.simple(n + "/bn3", LayerKind::kBatchNormAffine);
      if (k > 0) b.with_source(n + "/add", LayerKind::kAdd, block_in);
      b.simple(n + "/relu3", LayerKind::kReLU);
    }
    b.mark(detail::layer_label(static_cast<int>(s) + 2));
  }
  b.begin_unit("FC");
  b.simple("gap", LayerKind::kGlobalAvgPool);
  b.fc("fc", 1000);
  return std::move(b).finish("resnet50", input);
}

inline void add_mbconv(ChainBuilder& b, const std::string& n, std::size_t in_ch,
                       std::size_t expand, std::size_t k, std::size_t stride,
                       std::size_t out_ch) {
  const int block_in = b.last();
  const std::size_t mid = in_ch * expand;
  b.begin_unit("MBConv");
  if (expand != 1) {
    b.conv(n + "/expand", mid, 1, 1, 0);
    b.simple(n + "/expand_bn", LayerKind::kBatchNormAffine);
    b.simple(n + "/expand_swish", LayerKind::kSwish);
  }
  b.depthwise(n + "/dw", k, stride, k / 2);
  b.simple(n + "/dw_bn", LayerKind::kBatchNormAffine);
  const int se_source = b.simple(n + "/dw_swish", LayerKind::kSwish);
  b.simple(n + "/se_pool", LayerKind::kGlobalAvgPool);
  b.fc(n + "/se_reduce", std::max<std::size_t>(1, in_ch / 4));
  b.simple(n + "/se_swish", LayerKind::kSwish);
  b.fc(n + "/se_expand", mid);
  b.simple(n + "/se_gate", LayerKind::kSigmoid);
  b.with_source(n + "/se_scale", LayerKind::kChannelScale, se_source);
  b.conv(n + "/project", out_ch, 1, 1, 0);
  b.simple(n + "/project_bn", LayerKind::kBatchNormAffine);
  if (stride == 1 && in_ch == out_ch) b.with_source(n + "/add", LayerKind::kAdd, block_in);
}

// Seven MBConv stages (1, 2, 2, 3, 3, 4, 1 blocks). Boundaries: after the
// stem, after stages 1-6, and after stage 7 plus the 1x1 head conv.
inline ModelGraph build_efficientnetb0(const Shape& input) {
  ChainBuilder b;
  b.begin_unit("conv");
  b.conv("stem/conv", 32, 3, 2, 1);
  b.simple("stem/bn", LayerKind::kBatchNormAffine);
  b.simple("stem/swish", LayerKind::kSwish);
  b.mark(detail::layer_label(1));

  struct Stage {
    std::size_t expand, kernel, stride, out, repeats;
  };
  constexpr std::array<Stage, 7> stages{{{1, 3, 1, 16, 1},
                                         {6, 3, 2, 24, 2},
                                         {6, 5, 2, 40, 2},
                                         {6, 3, 2, 80, 3},
                                         {6, 5, 1, 112, 3},
                                         {6, 5, 2, 192, 4},
                                         {6, 3, 1, 320, 1}}};
  std::size_t channels = 32;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const Stage& st = stages[s];
    for (std::size_t r = 0; r < st.repeats; ++r) {
      const std::string n = "mbconv" + std::to_string(s + 1) + "_" + std::to_string(r + 1);
      add_mbconv(b, n, channels, st.expand, st.kernel, r == 0 ? st.stride : 1, st.out);
      channels = st.out;
    }
    if (s + 1 < stages.size()) b.mark(detail::layer_label(static_cast<int>(s) + 2));
  }
  b.begin_unit("conv");
  b.conv("head/conv", 1280, 1, 1, 0);
  b.simple("head/bn", LayerKind::kBatchNormAffine);
  b.simple("head/swish", LayerKind::kSwish);
  b.mark(detail::layer_label(8));
  b.begin_unit("FC");
  b.simple("gap", LayerKind::kGlobalAvgPool);
  b.fc("fc", 1000);
  return std::move(b).finish("efficientnetb0", input);
}

// Small four-stage CNN for desk-scale inversion experiments.
inline ModelGraph build_toy4(const Shape& input) {
  ChainBuilder b;
  for (int i = 1; i <= 4; ++i) {
    const std::string n = "conv" + std::to_string(i);
    b.begin_unit("conv");
    if (i > 1) b.pool(n + "/pool", LayerKind::kMaxPool, 2, 2);
    b.conv(n, 8, 3, 1, 1);
    b.simple(n + "/relu", LayerKind::kReLU);
    b.mark("L" + std::to_string(i));
  }
  return std::move(b).finish("toy4", input);
}

}  // namespace detail

inline const std::vector<std::string>& builtin_architectures() {
  static const std::vector<std::string> names{"vgg16", "resnet50", "efficientnetb0", "toy4"};
  return names;
}

/// Architectures whose runtimes ship with calibrated cost profiles.
inline const std::vector<std::string>& profiled_architectures() {
  static const std::vector<std::string> names{"vgg16", "resnet50", "efficientnetb0"};
  return names;
}

inline Shape default_input_shape(const std::string& arch) {
  if (arch == "toy4") return {3, 16, 16};
  return {3, 224, 224};
}

/// Builds a named architecture. Throws LookupError for unknown names and
/// ShapeError when the input cannot survive the downsampling chain.
inline ModelGraph build_architecture(const std::string& arch, const Shape& input_shape) {
  const auto& known = builtin_architectures();
  if (std::find(known.begin(), known.end(), arch) == known.end())
    throw LookupError("unknown architecture '" + arch + "'");
  if (input_shape.size() != 3)
    throw ShapeError("architecture input must be CxHxW, got " + shape_to_string(input_shape));
  for (std::size_t e : input_shape)
    if (e == 0) throw ShapeError("input extents must be positive");
  // Total spatial downsampling of each chain; anything smaller collapses.
  const std::size_t min_extent = arch == "toy4" ? 8 : 32;
  if (input_shape[1] < min_extent || input_shape[2] < min_extent)
    throw ShapeError("input " + shape_to_string(input_shape) + " too small for " + arch +
                     " (spatial extents must be at least " + std::to_string(min_extent) + ")");
  try {
    if (arch == "vgg16") return detail::build_vgg16(input_shape);
    if (arch == "resnet50") return detail::build_resnet50(input_shape);
    if (arch == "efficientnetb0") return detail::build_efficientnetb0(input_shape);
    if (arch == "toy4") return detail::build_toy4(input_shape);
  } catch (const ShapeError& e) {
    throw ShapeError("input " + shape_to_string(input_shape) + " too small for " + arch +
                     ": " + e.what());
  }
  throw LookupError("unknown architecture '" + arch + "'");
}

inline ModelGraph build_architecture(const std::string& arch) {
  return build_architecture(arch, default_input_shape(arch));
}

}  // namespace teesplit
