#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "cludi/config.hpp"
#include "cludi/model.hpp"
#include "cludi/optimizer.hpp"
#include "cludi/trainer.hpp"
#include "oracles.hpp"

namespace cludi::testing {

// d=4, K=3, n=6, two hidden layers of width 8, short schedule.
inline TrainConfig tiny_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.embed_dim = 4;
  c.clusters = 3;
  c.hidden = 8;
  c.hidden_layers = 2;
  c.time_dim = 4;
  c.steps = 50;
  c.teacher_steps = 5;
  c.views = 2;
  c.batch_items = 3;
  c.seed = seed;
  return c;
}

inline Eigen::MatrixXd tiny_features(std::uint64_t seed, int n = 6, int N = 3) {
  RandomStream rng(seed);
  Eigen::MatrixXd X(n, N);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  return X;
}

// Largest relative error between backprop and central differences over the
// denoiser weights and biases, L and E.
inline double gradient_error(const Model& model, const TrainingBatch& batch, const LossConfig& cfg,
                             double step = 1e-6, double floor = 1e-6) {
  DenoiserParams p = model.denoiser;
  HeadParams h = model.heads;
  const BackpropResult r = backprop(p, h, batch, cfg);
  const auto loss = [&] { return batch_loss(p, h, batch, cfg); };
  double worst = 0.0;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    worst = std::max(worst, oracle::max_relative_error(
                                r.grads.denoiser.weights[l],
                                oracle::finite_difference(p.weights[l], loss, step), floor));
    worst = std::max(worst, oracle::max_relative_error(
                                r.grads.denoiser.biases[l],
                                oracle::finite_difference(p.biases[l], loss, step), floor));
  }
  worst = std::max(worst, oracle::max_relative_error(
                              r.grads.logits, oracle::finite_difference(h.logits, loss, step), floor));
  worst = std::max(worst, oracle::max_relative_error(
                              r.grads.embed, oracle::finite_difference(h.embed, loss, step), floor));
  return worst;
}

}  // namespace cludi::testing
