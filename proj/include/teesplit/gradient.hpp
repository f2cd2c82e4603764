#pragma once

#include <string>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/network.hpp"

namespace teesplit {

namespace kernels {

inline void conv_backward_input(const LayerSpec& l, const LayerParams& p, const Tensor& gout,
                                Tensor& gin) {
  const bool dw = l.kind == LayerKind::kDepthwiseConv2d;
  const std::size_t cin = gin.shape()[0], H = gin.shape()[1], W = gin.shape()[2];
  const std::size_t cout = gout.shape()[0], Ho = gout.shape()[1], Wo = gout.shape()[2];
  const std::size_t k = l.kernel, s = l.stride, pad = l.padding;
  const std::size_t per_group = dw ? 1 : cin;
  for (std::size_t oc = 0; oc < cout; ++oc) {
    const double* go = gout.raw() + oc * Ho * Wo;
    for (std::size_t g = 0; g < per_group; ++g) {
      const std::size_t ic = dw ? oc : g;
      double* gx = gin.raw() + ic * H * W;
      const double* wk = p.weight.data() + (oc * per_group + g) * k * k;
      for (std::size_t kh = 0; kh < k; ++kh) {
        const auto [oh_lo, oh_hi] = valid_range(Ho, H, s, kh, pad);
        for (std::size_t kw = 0; kw < k; ++kw) {
          const double w = wk[kh * k + kw];
          const auto [ow_lo, ow_hi] = valid_range(Wo, W, s, kw, pad);
          for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
            double* xr = gx + (oh * s + kh - pad) * W + kw - pad;
            const double* grow = go + oh * Wo;
            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) xr[ow * s] += w * grow[ow];
          }
        }
      }
    }
  }
}

}  // namespace kernels

/// Accumulates the input-side gradients of layer `l` into `gin` (and, for
/// Add/ChannelScale, into `gsrc`).
inline void backprop_layer(const LayerSpec& l, const LayerParams& p, const Tensor& in,
                           const Tensor* source, const Tensor& gout, Tensor& gin, Tensor* gsrc) {
  switch (l.kind) {
    case LayerKind::kConv2d:
    case LayerKind::kDepthwiseConv2d:
      kernels::conv_backward_input(l, p, gout, gin);
      return;
    case LayerKind::kFullyConnected: {
      const std::size_t n = in.size();
      for (std::size_t j = 0; j < l.units; ++j) {
        const double* w = p.weight.data() + j * n;
        const double g = gout[j];
        for (std::size_t i = 0; i < n; ++i) gin[i] += w[i] * g;
      }
      return;
    }
    case LayerKind::kReLU:
      // Subgradient 0 at exactly zero.
      for (std::size_t i = 0; i < in.size(); ++i)
        if (in[i] > 0) gin[i] += gout[i];
      return;
    case LayerKind::kSwish:
      for (std::size_t i = 0; i < in.size(); ++i) {
        const double s = kernels::sigmoid(in[i]);
        gin[i] += gout[i] * (s + in[i] * s * (1.0 - s));
      }
      return;
    case LayerKind::kSigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) {
        const double s = kernels::sigmoid(in[i]);
        gin[i] += gout[i] * s * (1.0 - s);
      }
      return;
    case LayerKind::kBatchNormAffine: {
      const std::size_t c = in.shape()[0], per = in.size() / c;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < per; ++i) gin[ch * per + i] += p.weight[ch] * gout[ch * per + i];
      return;
    }
    case LayerKind::kMaxPool:
      kernels::for_each_window(l, in.shape(), gout.shape(),
                               [&](std::size_t o, const std::vector<std::size_t>& idx) {
                                 gin[kernels::window_argmax(in, idx)] += gout[o];
                               });
      return;
    case LayerKind::kAvgPool:
      kernels::for_each_window(l, in.shape(), gout.shape(),
                               [&](std::size_t o, const std::vector<std::size_t>& idx) {
                                 const double share = gout[o] / static_cast<double>(idx.size());
                                 for (std::size_t i : idx) gin[i] += share;
                               });
      return;
    case LayerKind::kGlobalAvgPool: {
      const std::size_t C = in.shape()[0], per = in.size() / C;
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < per; ++i) gin[c * per + i] += gout[c] / static_cast<double>(per);
      return;
    }
    case LayerKind::kAdd:
      for (std::size_t i = 0; i < gout.size(); ++i) {
        gin[i] += gout[i];
        (*gsrc)[i] += gout[i];
      }
      return;
    case LayerKind::kChannelScale: {
      const std::size_t C = source->shape()[0], per = source->size() / C;
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0;
        for (std::size_t i = 0; i < per; ++i) {
          acc += gout[c * per + i] * (*source)[c * per + i];
          (*gsrc)[c * per + i] += gout[c * per + i] * in[c];
        }
        gin[c] += acc;
      }
      return;
    }
    case LayerKind::kFlatten:
      for (std::size_t i = 0; i < gout.size(); ++i) gin[i] += gout[i];
      return;
  }
  throw InvalidArgument("unhandled layer kind");
}

/// d<activation_end, cotangent>/d(input) from a recorded tape.
inline Tensor backpropagate(const Network& net, const ForwardTape& tape, std::size_t end,
                            const Tensor& cotangent) {
  const auto& layers = net.graph().layers();
  if (tape.activations.size() < end + 1) throw InvalidArgument("tape shorter than boundary");
  if (cotangent.shape() != tape.activations[end].shape())
    throw ShapeError("cotangent shape " + shape_to_string(cotangent.shape()) +
                     " differs from boundary activation " +
                     shape_to_string(tape.activations[end].shape()));
  std::vector<Tensor> grads(end + 1);
  grads[end] = cotangent;
  for (std::size_t i = end; i-- > 0;) {
    const LayerSpec& l = layers[i];
    if (grads[i].shape().empty()) grads[i] = Tensor(tape.activations[i].shape());
    const Tensor* src = nullptr;
    Tensor* gsrc = nullptr;
    if (has_source(l.kind)) {
      const auto s = static_cast<std::size_t>(l.source + 1);
      src = &tape.activations[s];
      if (grads[s].shape().empty()) grads[s] = Tensor(src->shape());
      gsrc = &grads[s];
    }
    backprop_layer(l, net.params(i), tape.activations[i], src, grads[i + 1], grads[i], gsrc);
    grads[i + 1] = Tensor();
  }
  return std::move(grads[0]);
}

/// Gradient of <activation at boundary, cotangent> with respect to the input.
inline Tensor input_gradient(const Network& net, const std::string& boundary_label,
                             const Tensor& input, const Tensor& cotangent) {
  const std::size_t b = net.graph().point(boundary_label).boundary;
  const ForwardTape tape = record_tape(net, input, b);
  return backpropagate(net, tape, b, cotangent);
}

}  // namespace teesplit
