#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/gradient.hpp"
#include "teesplit/network.hpp"

namespace teesplit {

struct AttackConfig {
  std::size_t steps = 2000;
  double step_size = 0.05;
  std::uint64_t init_seed = 0;
  double pixel_low = 0.0;
  double pixel_high = 1.0;

  void validate() const {
    if (steps < 1) throw InvalidArgument("attack needs at least one step");
    if (!(step_size > 0)) throw InvalidArgument("attack step size must be positive");
    if (!(pixel_low < pixel_high)) throw InvalidArgument("pixel bounds must satisfy low < high");
  }
};

struct AttackResult {
  Tensor reconstruction;
  /// Loss of the current iterate after each step (index 0 is the initial loss).
  std::vector<double> loss_history;
};

namespace detail {

struct LossAndGradient {
  double loss = 0.0;
  Tensor gradient;
};

inline LossAndGradient inversion_objective(const Network& net, std::size_t boundary,
                                           const Tensor& x, const Tensor& target) {
  const ForwardTape tape = record_tape(net, x, boundary);
  const Tensor& act = tape.activations[boundary];
  Tensor residual(act.shape());
  double loss = 0;
  for (std::size_t i = 0; i < act.size(); ++i) {
    residual[i] = act[i] - target[i];
    loss += 0.5 * residual[i] * residual[i];
  }
  return {loss, backpropagate(net, tape, boundary, residual)};
}

}  // namespace detail

/// Reconstructs an input whose activation after `boundary` layers matches
/// `exposed`, by projected gradient descent on 0.5 * ||F(x) - exposed||^2
/// over the pixel box. A step that would raise the loss is rejected and the
/// step size halved; accepted steps grow it by 20%.
inline AttackResult run_inversion(const Network& net, std::size_t boundary, const Tensor& exposed,
                                  const AttackConfig& cfg) {
  cfg.validate();
  if (exposed.shape() != net.graph().activation_shape(boundary))
    throw ShapeError("exposed feature map " + shape_to_string(exposed.shape()) +
                     " does not match boundary activation " +
                     shape_to_string(net.graph().activation_shape(boundary)));

  std::mt19937_64 rng(cfg.init_seed);
  std::uniform_real_distribution<double> init(cfg.pixel_low, cfg.pixel_high);
  Tensor x(net.graph().input_shape());
  for (double& v : x.data()) v = init(rng);

  auto current = detail::inversion_objective(net, boundary, x, exposed);
  if (!std::isfinite(current.loss)) throw NumericError("inversion diverged at step 0");
  AttackResult result;
  result.loss_history.reserve(cfg.steps + 1);
  result.loss_history.push_back(current.loss);

  double eta = cfg.step_size;
  Tensor candidate(x.shape());
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    for (std::size_t i = 0; i < x.size(); ++i)
      candidate[i] = std::clamp(x[i] - eta * current.gradient[i], cfg.pixel_low, cfg.pixel_high);
    auto next = detail::inversion_objective(net, boundary, candidate, exposed);
    if (!std::isfinite(next.loss))
      throw NumericError("inversion diverged at step " + std::to_string(step));
    if (next.loss <= current.loss) {
      std::swap(x, candidate);
      current = std::move(next);
      eta *= 1.2;
    } else {
      eta *= 0.5;
    }
    result.loss_history.push_back(current.loss);
  }
  result.reconstruction = std::move(x);
  return result;
}

/// Reconstruction of the input image from the feature map exposed at a
/// named partition point.
inline Tensor invert_feature_map(const Network& net, const std::string& boundary_label,
                                 const Tensor& exposed, const AttackConfig& cfg) {
  return run_inversion(net, net.graph().point(boundary_label).boundary, exposed, cfg).reconstruction;
}

}  // namespace teesplit
