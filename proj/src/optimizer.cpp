#include "cludi/optimizer.hpp"

#include <cmath>

#include "cludi/error.hpp"

namespace cludi {

namespace {

// Calls fn(param, grad, m, v) for every tensor, as flat arrays.
template <typename Fn>
void for_each_tensor(DenoiserParams& params, HeadParams& heads, const GradientBundle& grads,
                     GradientBundle& m, GradientBundle& v, Fn&& fn) {
  for (std::size_t l = 0; l < params.layers(); ++l) {
    fn(params.weights[l].array(), grads.denoiser.weights[l].array(), m.denoiser.weights[l].array(),
       v.denoiser.weights[l].array());
    fn(params.biases[l].array(), grads.denoiser.biases[l].array(), m.denoiser.biases[l].array(),
       v.denoiser.biases[l].array());
  }
  fn(heads.logits.array(), grads.logits.array(), m.logits.array(), v.logits.array());
  fn(heads.embed.array(), grads.embed.array(), m.embed.array(), v.embed.array());
}

}  // namespace

GradientBundle GradientBundle::zeros_like(const DenoiserParams& params, const HeadParams& heads) {
  GradientBundle g;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    g.denoiser.weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                                       params.weights[l].cols()));
    g.denoiser.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  g.logits = Eigen::MatrixXd::Zero(heads.logits.rows(), heads.logits.cols());
  g.embed = Eigen::MatrixXd::Zero(heads.embed.rows(), heads.embed.cols());
  return g;
}

bool GradientBundle::same_shape(const DenoiserParams& params, const HeadParams& heads) const {
  if (denoiser.weights.size() != params.layers() || denoiser.biases.size() != params.layers()) {
    return false;
  }
  for (std::size_t l = 0; l < params.layers(); ++l) {
    if (denoiser.weights[l].rows() != params.weights[l].rows() ||
        denoiser.weights[l].cols() != params.weights[l].cols() ||
        denoiser.biases[l].size() != params.biases[l].size()) {
      return false;
    }
  }
  return logits.rows() == heads.logits.rows() && logits.cols() == heads.logits.cols() &&
         embed.rows() == heads.embed.rows() && embed.cols() == heads.embed.cols();
}

bool GradientBundle::all_finite() const {
  for (const auto& w : denoiser.weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : denoiser.biases) {
    if (!b.allFinite()) return false;
  }
  return logits.allFinite() && embed.allFinite();
}

double GradientBundle::squared_norm() const {
  double s = logits.squaredNorm() + embed.squaredNorm();
  for (const auto& w : denoiser.weights) s += w.squaredNorm();
  for (const auto& b : denoiser.biases) s += b.squaredNorm();
  return s;
}

OptimizerState OptimizerState::init(const DenoiserParams& params, const HeadParams& heads,
                                    AdamConfig config) {
  OptimizerState s;
  s.config = config;
  s.first_moment = GradientBundle::zeros_like(params, heads);
  s.second_moment = GradientBundle::zeros_like(params, heads);
  return s;
}

void adam_step(DenoiserParams& params, HeadParams& heads, const GradientBundle& grads,
               OptimizerState& state) {
  if (!grads.same_shape(params, heads) || !state.first_moment.same_shape(params, heads) ||
      !state.second_moment.same_shape(params, heads)) {
    throw InvalidArgument("adam_step: gradient or moment shapes do not match parameters");
  }
  ++state.step;
  const auto& c = state.config;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = c.learning_rate / correction1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(correction2);

  for_each_tensor(params, heads, grads, state.first_moment, state.second_moment,
                  [&](auto p, const auto g, auto m, auto v) {
                    m = c.beta1 * m + (1.0 - c.beta1) * g;
                    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
                    p -= step_size * m / (v.sqrt() * inv_sqrt_c2 + c.eps);
                  });
}

}  // namespace cludi
