#pragma once

#include <cstdint>

#include "cludi/denoiser.hpp"
#include "cludi/heads.hpp"

namespace cludi {

// Gradients (or any per-parameter tensors) mirroring DenoiserParams + L, E.
struct GradientBundle {
  DenoiserGradient denoiser;
  Eigen::MatrixXd logits;  // ∂/∂L
  Eigen::MatrixXd embed;   // ∂/∂E

  static GradientBundle zeros_like(const DenoiserParams& params, const HeadParams& heads);

  bool same_shape(const DenoiserParams& params, const HeadParams& heads) const;
  bool all_finite() const;
  double squared_norm() const;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  GradientBundle first_moment;
  GradientBundle second_moment;
  std::int64_t step = 0;

  static OptimizerState init(const DenoiserParams& params, const HeadParams& heads,
                             AdamConfig config = {});
};

// Bias-corrected Adam update of denoiser weights, L and E.
void adam_step(DenoiserParams& params, HeadParams& heads, const GradientBundle& grads,
               OptimizerState& state);

}  // namespace cludi
