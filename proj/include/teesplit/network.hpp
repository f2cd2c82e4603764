#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/model_graph.hpp"
#include "teesplit/tensor.hpp"

namespace teesplit {

/// Weights and biases of one layer. Layout:
///   Conv2d          weight [out][in][k][k], bias [out]
///   DepthwiseConv2d weight [C][k][k],       bias [C]
///   FullyConnected  weight [out][in],       bias [out]
///   BatchNormAffine weight = gamma [C],     bias = beta [C]
struct LayerParams {
  std::vector<double> weight;
  std::vector<double> bias;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> expected_param_sizes(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kConv2d:
      return {l.out_channels * l.input_shape[0] * l.kernel * l.kernel, l.out_channels};
    case LayerKind::kDepthwiseConv2d:
      return {l.input_shape[0] * l.kernel * l.kernel, l.input_shape[0]};
    case LayerKind::kFullyConnected:
      return {l.units * shape_elements(l.input_shape), l.units};
    case LayerKind::kBatchNormAffine:
      return {l.input_shape[0], l.input_shape[0]};
    default:
      return {0, 0};
  }
}

inline std::size_t fan_in(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kConv2d:
      return l.input_shape[0] * l.kernel * l.kernel;
    case LayerKind::kDepthwiseConv2d:
      return l.kernel * l.kernel;
    case LayerKind::kFullyConnected:
      return shape_elements(l.input_shape);
    default:
      return 1;
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// He-style fan-in initialisation of one layer from an independent stream
/// derived from (seed, layer index).
inline LayerParams init_layer_params(const LayerSpec& l, std::uint64_t seed,
                                     std::size_t index) {
  const auto [nw, nb] = detail::expected_param_sizes(l);
  LayerParams p;
  if (nw == 0) return p;
  std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(index + 1)));
  p.weight.resize(nw);
  p.bias.resize(nb);
  if (l.kind == LayerKind::kBatchNormAffine) {
    std::uniform_real_distribution<double> gamma(0.8, 1.2), beta(-0.1, 0.1);
    for (auto& g : p.weight) g = gamma(rng);
    for (auto& b : p.bias) b = beta(rng);
    return p;
  }
  std::normal_distribution<double> w(0.0, std::sqrt(2.0 / static_cast<double>(detail::fan_in(l))));
  std::uniform_real_distribution<double> b(-0.05, 0.05);
  for (auto& x : p.weight) x = w(rng);
  for (auto& x : p.bias) x = b(rng);
  return p;
}

/// A model graph with materialised parameters. Parameters are shared
/// (immutably) between a network and the halves produced by `split`.
class Network {
 public:
  using ParamPtr = std::shared_ptr<const LayerParams>;

  Network(ModelGraph graph, std::vector<ParamPtr> params)
      : graph_(std::move(graph)), params_(std::move(params)) {
    if (params_.size() != graph_.layers().size())
      throw InvalidArgument("network " + graph_.name() + ": expected " +
                            std::to_string(graph_.layers().size()) + " parameter slots");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const LayerSpec& l = graph_.layers()[i];
      const auto [nw, nb] = detail::expected_param_sizes(l);
      if (nw == 0) {
        if (!params_[i]) params_[i] = std::make_shared<const LayerParams>();
        continue;
      }
      if (!params_[i] || params_[i]->weight.size() != nw || params_[i]->bias.size() != nb)
        throw ShapeError("layer '" + l.name + "': parameter sizes do not match its shape");
    }
  }

  static Network initialize(ModelGraph graph, std::uint64_t seed) {
    std::vector<ParamPtr> params;
    params.reserve(graph.layers().size());
    for (std::size_t i = 0; i < graph.layers().size(); ++i)
      params.push_back(std::make_shared<const LayerParams>(
          init_layer_params(graph.layers()[i], seed, i)));
    return Network(std::move(graph), std::move(params));
  }

  const ModelGraph& graph() const { return graph_; }
  const LayerParams& params(std::size_t i) const { return *params_[i]; }

  Network slice(std::size_t begin, std::size_t end, std::string name) const {
    ModelGraph g = graph_.slice(begin, end, std::move(name));
    std::vector<ParamPtr> p(params_.begin() + static_cast<std::ptrdiff_t>(begin),
                            params_.begin() + static_cast<std::ptrdiff_t>(end));
    return Network(std::move(g), std::move(p));
  }

 private:
  ModelGraph graph_;
  std::vector<ParamPtr> params_;
};

inline std::pair<Network, Network> split(const Network& net, const std::string& boundary_label) {
  const std::size_t b = net.graph().point(boundary_label).boundary;
  const std::string& n = net.graph().name();
  return {net.slice(0, b, n + "/enclave"),
          net.slice(b, net.graph().layers().size(), n + "/accelerator")};
}

namespace kernels {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Range of output positions o for which o*stride + offset - pad lies in [0, n).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t n_out, std::size_t n_in,
                                                       std::size_t stride, std::size_t offset,
                                                       std::size_t pad) {
  // o*stride + offset >= pad  and  o*stride + offset - pad <= n_in - 1
  std::size_t lo = 0;
  if (pad > offset) lo = (pad - offset + stride - 1) / stride;
  if (n_in + pad < offset + 1) return {0, 0};
  std::size_t hi = (n_in - 1 + pad - offset) / stride + 1;
  if (hi > n_out) hi = n_out;
  if (lo > hi) lo = hi;
  return {lo, hi};
}

inline Tensor conv_forward(const LayerSpec& l, const LayerParams& p, const Tensor& in) {
  Tensor out(l.output_shape);
  const bool dw = l.kind == LayerKind::kDepthwiseConv2d;
  const std::size_t cin = in.shape()[0], H = in.shape()[1], W = in.shape()[2];
  const std::size_t cout = out.shape()[0], Ho = out.shape()[1], Wo = out.shape()[2];
  const std::size_t k = l.kernel, s = l.stride, pad = l.padding;
  const std::size_t per_group = dw ? 1 : cin;
  for (std::size_t oc = 0; oc < cout; ++oc) {
    double* o = out.raw() + oc * Ho * Wo;
    for (std::size_t i = 0; i < Ho * Wo; ++i) o[i] = p.bias[oc];
    for (std::size_t g = 0; g < per_group; ++g) {
      const std::size_t ic = dw ? oc : g;
      const double* x = in.raw() + ic * H * W;
      const double* wk = p.weight.data() + (oc * per_group + g) * k * k;
      for (std::size_t kh = 0; kh < k; ++kh) {
        const auto [oh_lo, oh_hi] = valid_range(Ho, H, s, kh, pad);
        for (std::size_t kw = 0; kw < k; ++kw) {
          const double w = wk[kh * k + kw];
          const auto [ow_lo, ow_hi] = valid_range(Wo, W, s, kw, pad);
          for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
            const double* xr = x + (oh * s + kh - pad) * W + kw - pad;
            double* orow = o + oh * Wo;
            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += w * xr[ow * s];
          }
        }
      }
    }
  }
  return out;
}

inline Tensor fc_forward(const LayerSpec& l, const LayerParams& p, const Tensor& in) {
  Tensor out(l.output_shape);
  const std::size_t n = in.size();
  for (std::size_t j = 0; j < l.units; ++j) {
    const double* w = p.weight.data() + j * n;
    double acc = p.bias[j];
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * in[i];
    out[j] = acc;
  }
  return out;
}

inline Tensor batchnorm_forward(const LayerParams& p, const Tensor& in) {
  Tensor out(in.shape());
  const std::size_t c = in.shape()[0], per = in.size() / c;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < per; ++i)
      out[ch * per + i] = p.weight[ch] * in[ch * per + i] + p.bias[ch];
  return out;
}

/// Visits each pooling window: f(out_index, in_index_list...) via callback
/// receiving the output flat index and the valid input flat indices.
template <typename F>
void for_each_window(const LayerSpec& l, const Shape& in_shape, const Shape& out_shape, F&& f) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t Ho = out_shape[1], Wo = out_shape[2];
  const std::size_t k = l.kernel, s = l.stride, pad = l.padding;
  std::vector<std::size_t> idx;
  idx.reserve(k * k);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t oh = 0; oh < Ho; ++oh)
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        idx.clear();
        for (std::size_t kh = 0; kh < k; ++kh) {
          const std::size_t ih = oh * s + kh;
          if (ih < pad || ih - pad >= H) continue;
          for (std::size_t kw = 0; kw < k; ++kw) {
            const std::size_t iw = ow * s + kw;
            if (iw < pad || iw - pad >= W) continue;
            idx.push_back((c * H + ih - pad) * W + iw - pad);
          }
        }
        f((c * Ho + oh) * Wo + ow, idx);
      }
}

/// First maximal element in row-major window order (lowest flat index on ties).
inline std::size_t window_argmax(const Tensor& in, const std::vector<std::size_t>& idx) {
  std::size_t best = idx.front();
  for (std::size_t i : idx)
    if (in[i] > in[best]) best = i;
  return best;
}

inline Tensor pool_forward(const LayerSpec& l, const Tensor& in) {
  Tensor out(l.output_shape);
  const bool is_max = l.kind == LayerKind::kMaxPool;
  for_each_window(l, in.shape(), out.shape(), [&](std::size_t o, const std::vector<std::size_t>& idx) {
    if (is_max) {
      out[o] = in[window_argmax(in, idx)];
    } else {
      double acc = 0;
      for (std::size_t i : idx) acc += in[i];
      out[o] = acc / static_cast<double>(idx.size());
    }
  });
  return out;
}

inline Tensor global_avg_pool_forward(const Tensor& in) {
  const std::size_t C = in.shape()[0], per = in.size() / C;
  Tensor out(Shape{C});
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0;
    for (std::size_t i = 0; i < per; ++i) acc += in[c * per + i];
    out[c] = acc / static_cast<double>(per);
  }
  return out;
}

inline Tensor channel_scale_forward(const Tensor& gate, const Tensor& source) {
  Tensor out(source.shape());
  const std::size_t C = source.shape()[0], per = source.size() / C;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < per; ++i) out[c * per + i] = source[c * per + i] * gate[c];
  return out;
}

template <typename F>
Tensor map(const Tensor& in, F&& f) {
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

}  // namespace kernels

/// Output of layer `l` given its input and (for Add/ChannelScale) its source.
inline Tensor apply_layer(const LayerSpec& l, const LayerParams& p, const Tensor& in,
                          const Tensor* source) {
  switch (l.kind) {
    case LayerKind::kConv2d:
    case LayerKind::kDepthwiseConv2d:
      return kernels::conv_forward(l, p, in);
    case LayerKind::kFullyConnected:
      return kernels::fc_forward(l, p, in);
    case LayerKind::kReLU:
      return kernels::map(in, [](double x) { return x > 0 ? x : 0.0; });
    case LayerKind::kSwish:
      return kernels::map(in, [](double x) { return x * kernels::sigmoid(x); });
    case LayerKind::kSigmoid:
      return kernels::map(in, [](double x) { return kernels::sigmoid(x); });
    case LayerKind::kBatchNormAffine:
      return kernels::batchnorm_forward(p, in);
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      return kernels::pool_forward(l, in);
    case LayerKind::kGlobalAvgPool:
      return kernels::global_avg_pool_forward(in);
    case LayerKind::kAdd: {
      Tensor out = in;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*source)[i];
      return out;
    }
    case LayerKind::kChannelScale:
      return kernels::channel_scale_forward(in, *source);
    case LayerKind::kFlatten:
      return in.reshaped(l.output_shape);
  }
  throw InvalidArgument("unhandled layer kind");
}

/// Every activation of the first `end` layers: activations[0] is the input,
/// activations[i + 1] the output of layer i.
struct ForwardTape {
  std::vector<Tensor> activations;
};

namespace detail {

inline void check_input(const ModelGraph& g, const Tensor& input) {
  if (input.shape() != g.input_shape())
    throw ShapeError("model " + g.name() + " expects input " + shape_to_string(g.input_shape()) +
                     ", got " + shape_to_string(input.shape()));
  if (!input.all_finite()) throw NumericError("model " + g.name() + ": non-finite input");
}

// Runs layers [0, end). With keep_all every activation is retained, otherwise
// only those still referenced by a later Add/ChannelScale.
inline std::vector<Tensor> run_layers(const Network& net, const Tensor& input, std::size_t end,
                                      bool keep_all) {
  const auto& layers = net.graph().layers();
  std::vector<std::size_t> last_use(end + 1, 0);
  for (std::size_t i = 0; i < end; ++i) {
    last_use[i] = i;  // activation i feeds layer i
    if (has_source(layers[i].kind))
      last_use[static_cast<std::size_t>(layers[i].source + 1)] = i;
  }
  std::vector<Tensor> acts(end + 1);
  acts[0] = input;
  for (std::size_t i = 0; i < end; ++i) {
    const LayerSpec& l = layers[i];
    const Tensor* src = has_source(l.kind) ? &acts[static_cast<std::size_t>(l.source + 1)] : nullptr;
    acts[i + 1] = apply_layer(l, net.params(i), acts[i], src);
    if (!keep_all) {
      for (std::size_t a = 0; a <= i; ++a)
        if (last_use[a] <= i && !acts[a].shape().empty()) acts[a] = Tensor();
    }
  }
  return acts;
}

}  // namespace detail

/// Activation after the first `boundary` layers.
inline Tensor forward_prefix(const Network& net, const Tensor& input, std::size_t boundary) {
  detail::check_input(net.graph(), input);
  if (boundary > net.graph().layers().size())
    throw InvalidArgument("boundary past end of " + net.graph().name());
  auto acts = detail::run_layers(net, input, boundary, false);
  Tensor out = std::move(acts[boundary]);
  if (!out.all_finite()) throw NumericError("model " + net.graph().name() + ": non-finite activation");
  return out;
}

inline Tensor forward(const Network& net, const Tensor& input) {
  return forward_prefix(net, input, net.graph().layers().size());
}

/// The exposed feature map at a named partition point.
inline Tensor forward_until(const Network& net, const Tensor& input, const std::string& boundary_label) {
  return forward_prefix(net, input, net.graph().point(boundary_label).boundary);
}

inline ForwardTape record_tape(const Network& net, const Tensor& input, std::size_t end) {
  detail::check_input(net.graph(), input);
  if (end > net.graph().layers().size()) throw InvalidArgument("boundary past end of network");
  return ForwardTape{detail::run_layers(net, input, end, true)};
}

}  // namespace teesplit
