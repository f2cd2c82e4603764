#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "teesplit/error.hpp"
#include "teesplit/tensor.hpp"

namespace teesplit {

enum class LayerKind {
  kConv2d,
  kDepthwiseConv2d,
  kFullyConnected,
  kReLU,
  kSwish,
  kSigmoid,
  kBatchNormAffine,
  kMaxPool,
  kAvgPool,
  kGlobalAvgPool,
  kAdd,           // input + activation of `source`
  kChannelScale,  // activation of `source` scaled per channel by the input
  kFlatten,
};

inline constexpr std::array<std::pair<LayerKind, std::string_view>, 13>
    kLayerKindNames{{
        {LayerKind::kConv2d, "Conv2d"},
        {LayerKind::kDepthwiseConv2d, "DepthwiseConv2d"},
        {LayerKind::kFullyConnected, "FullyConnected"},
        {LayerKind::kReLU, "ReLU"},
        {LayerKind::kSwish, "Swish"},
        {LayerKind::kSigmoid, "Sigmoid"},
        {LayerKind::kBatchNormAffine, "BatchNormAffine"},
        {LayerKind::kMaxPool, "MaxPool"},
        {LayerKind::kAvgPool, "AvgPool"},
        {LayerKind::kGlobalAvgPool, "GlobalAvgPool"},
        {LayerKind::kAdd, "Add"},
        {LayerKind::kChannelScale, "ChannelScale"},
        {LayerKind::kFlatten, "Flatten"},
    }};

inline std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kLayerKindNames)
    if (k == kind) return name;
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kLayerKindNames)
    if (n == name) return k;
  throw LookupError("unknown layer kind '" + std::string(name) + "'");
}

inline bool has_parameters(LayerKind kind) {
  return kind == LayerKind::kConv2d || kind == LayerKind::kDepthwiseConv2d ||
         kind == LayerKind::kFullyConnected ||
         kind == LayerKind::kBatchNormAffine;
}

inline bool has_source(LayerKind kind) {
  return kind == LayerKind::kAdd || kind == LayerKind::kChannelScale;
}

/// One primitive layer of a linear chain.
///
/// Layers are grouped into units: consecutive layers sharing a `unit_id` form
/// one countable block ("conv", "MBConv", "FC", ...). Partition boundaries may
/// only fall between units.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kReLU;
  std::string unit;
  int unit_id = 0;

  std::size_t out_channels = 0;  // Conv2d
  std::size_t kernel = 0;        // convs and pools (square)
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t units = 0;  // FullyConnected
  int source = -1;        // Add / ChannelScale; -1 is the graph input

  Shape input_shape;   // filled by shape inference
  Shape output_shape;  // filled by shape inference
};

namespace detail {

inline std::size_t pooled_extent(std::size_t in, std::size_t kernel,
                                 std::size_t stride, std::size_t padding,
                                 const std::string& layer) {
  if (kernel == 0 || stride == 0)
    throw InvalidArgument("layer '" + layer + "': kernel and stride must be positive");
  if (in + 2 * padding < kernel)
    throw ShapeError("layer '" + layer + "': spatial extent " +
                     std::to_string(in) + " too small for kernel " +
                     std::to_string(kernel));
  return (in + 2 * padding - kernel) / stride + 1;
}

inline void require_rank3(const Shape& s, const std::string& layer) {
  if (s.size() != 3)
    throw ShapeError("layer '" + layer + "' expects a CxHxW input, got " +
                     shape_to_string(s));
}

}  // namespace detail

/// Output shape of `layer` given its input and, for Add/ChannelScale, the
/// shape of its source activation.
inline Shape infer_output_shape(const LayerSpec& layer, const Shape& in,
                                const Shape* source_shape) {
  const std::string& nm = layer.name;
  switch (layer.kind) {
    case LayerKind::kConv2d:
    case LayerKind::kDepthwiseConv2d: {
      detail::require_rank3(in, nm);
      const std::size_t channels =
          layer.kind == LayerKind::kConv2d ? layer.out_channels : in[0];
      if (channels == 0)
        throw InvalidArgument("layer '" + nm + "': out_channels must be positive");
      return {channels,
              detail::pooled_extent(in[1], layer.kernel, layer.stride,
                                    layer.padding, nm),
              detail::pooled_extent(in[2], layer.kernel, layer.stride,
                                    layer.padding, nm)};
    }
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      detail::require_rank3(in, nm);
      if (layer.padding * 2 >= layer.kernel && layer.padding > 0)
        throw InvalidArgument("layer '" + nm + "': pool padding must be below half the kernel");
      return {in[0],
              detail::pooled_extent(in[1], layer.kernel, layer.stride,
                                    layer.padding, nm),
              detail::pooled_extent(in[2], layer.kernel, layer.stride,
                                    layer.padding, nm)};
    case LayerKind::kFullyConnected:
      if (layer.units == 0)
        throw InvalidArgument("layer '" + nm + "': units must be positive");
      return {layer.units};
    case LayerKind::kGlobalAvgPool:
      detail::require_rank3(in, nm);
      return {in[0]};
    case LayerKind::kFlatten:
      return {shape_elements(in)};
    case LayerKind::kAdd:
      if (!source_shape || *source_shape != in)
        throw ShapeError("layer '" + nm + "': skip source shape " +
                         (source_shape ? shape_to_string(*source_shape) : "?") +
                         " differs from input shape " + shape_to_string(in));
      return in;
    case LayerKind::kChannelScale:
      if (!source_shape || source_shape->size() != 3 || in.size() != 1 ||
          in[0] != (*source_shape)[0])
        throw ShapeError("layer '" + nm +
                         "': channel scale needs a [C] gate and a CxHxW source");
      return *source_shape;
    case LayerKind::kReLU:
    case LayerKind::kSwish:
    case LayerKind::kSigmoid:
      return in;
    case LayerKind::kBatchNormAffine:
      if (in.empty()) throw ShapeError("layer '" + nm + "': empty input");
      return in;
  }
  throw InvalidArgument("unhandled layer kind");
}

/// Multiply-accumulate count of one layer with inferred shapes.
///
/// Convolutions count out_elems * k * k * in_channels (1 input channel per
/// output for depthwise), fully connected layers in * out, every other kind
/// its output element count.
inline std::uint64_t layer_macs(const LayerSpec& layer) {
  const auto out = static_cast<std::uint64_t>(shape_elements(layer.output_shape));
  switch (layer.kind) {
    case LayerKind::kConv2d:
      return out * layer.kernel * layer.kernel * layer.input_shape[0];
    case LayerKind::kDepthwiseConv2d:
      return out * layer.kernel * layer.kernel;
    case LayerKind::kFullyConnected:
      return static_cast<std::uint64_t>(shape_elements(layer.input_shape)) *
             layer.units;
    default:
      return out;
  }
}

}  // namespace teesplit
