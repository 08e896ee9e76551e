#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cludi {

enum class Activation : std::uint8_t { gelu = 0 };

struct DenoiserShape {
  int embed_dim = 64;      // d
  int feature_dim = 0;     // n
  int time_dim = 64;       // width of the sinusoidal time embedding, even
  int hidden = 512;        // width of every hidden layer
  int hidden_layers = 2;   // number of hidden layers, >= 1
  int steps = 1000;        // T; timesteps fed to the network lie in [0, T]
  Activation activation = Activation::gelu;

  int input_dim() const noexcept { return embed_dim + feature_dim + time_dim; }
  void validate() const;
};

// MLP  [z_t ‖ x ‖ emb(t)] -> hidden -> ... -> d.
// weights[l] maps layer l's input to its output; the last layer is linear.
struct DenoiserParams {
  DenoiserShape shape;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  std::size_t layers() const noexcept { return weights.size(); }
  void validate() const;
};

// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
DenoiserParams init_denoiser(const DenoiserShape& shape, std::uint64_t seed);

// All-zero parameters of the given shape.
DenoiserParams zero_denoiser(const DenoiserShape& shape);

// [sin(t·ω_j), cos(t·ω_j)], ω_j = 10000^(-j / (width/2)), j = 0..width/2-1.
Eigen::VectorXd time_embedding(int t, int width, int steps);

// Single embedding.
Eigen::VectorXd denoiser_forward(const DenoiserParams& params, const Eigen::VectorXd& z_t,
                                 const Eigen::VectorXd& x, int t);

// Batched over columns: Z is d×M, X is n×M, one timestep per column.
Eigen::MatrixXd denoiser_forward(const DenoiserParams& params, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& X, std::span<const int> t);

// Batched with a single shared timestep.
Eigen::MatrixXd denoiser_forward(const DenoiserParams& params, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& X, int t);

// Intermediate activations of a batched forward pass, kept for backward.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;        // input of every layer
  std::vector<Eigen::MatrixXd> preactivation; // pre-activation of hidden layers
  Eigen::MatrixXd output;
};

ForwardCache denoiser_forward_cached(const DenoiserParams& params, const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& X, std::span<const int> t);

struct DenoiserGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Reverse-mode pass given ∂J/∂output (d×M).
DenoiserGradient denoiser_backward(const DenoiserParams& params, const ForwardCache& cache,
                                   const Eigen::MatrixXd& grad_output);

}  // namespace cludi
