#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cludi/config.hpp"
#include "cludi/data.hpp"
#include "cludi/losses.hpp"
#include "cludi/model.hpp"
#include "cludi/optimizer.hpp"

namespace cludi {

// Feature dropout with probability drop_prob, then N(0, σ²) noise on every
// coordinate with one σ² ~ U[sigma2_low, sigma2_high] per call.
Eigen::VectorXd augment_features(const Eigen::VectorXd& x, double drop_prob, double sigma2_low,
                                 double sigma2_high, RandomStream& rng);

// Teacher outputs for N items × B views. Column m = i·B + b. Detached: these
// are plain values and nothing downstream differentiates through them.
struct TeacherTargets {
  Eigen::MatrixXd denoised;  // z̃_0 from the reverse chain, d×M
  Eigen::MatrixXd probs;     // u = softmax(L·z̃_0 / τ), K×M
  Eigen::MatrixXd targets;   // z0 = √d·E·u / ‖E·u‖, d×M
  Eigen::MatrixXd logits;    // L·z̃_0 as an M×K matrix
};

// Runs `views` reverse chains per column of X (n×N, clean features) on the
// teacher grid. Chain m draws from the stream derive_seed(seed, {m}).
TeacherTargets teacher_generate(const Model& model, const Eigen::MatrixXd& X, int views,
                                std::uint64_t seed);

// Everything the student step needs. Teacher-side entries are fixed values.
struct TrainingBatch {
  Eigen::MatrixXd features;        // augmented x^{b,i}, n×M
  Eigen::MatrixXd teacher_probs;   // u, K×M
  Eigen::MatrixXd teacher_logits;  // M×K
  Eigen::MatrixXd targets;         // z0 at assembly time, d×M
  Eigen::MatrixXd noised;          // z_{t_b}, d×M
  std::vector<int> timesteps;      // t_b ∈ [1, T]
  LossWeights weights;

  Eigen::Index size() const noexcept { return features.cols(); }
};

// Teacher pass on clean X, B augmented views per item, t_b ~ U{1..T},
// z_{t_b} by forward noising of the teacher target.
TrainingBatch assemble_batch(const Model& model, const Eigen::MatrixXd& X, const TrainConfig& config,
                             std::uint64_t seed);

struct StudentOutput {
  Eigen::MatrixXd z0_pred;  // ẑ_0, d×M
  Eigen::MatrixXd probs;    // û, M×K
  std::size_t denoiser_evaluations = 0;
};

// One denoiser evaluation per item; no sampling chain.
StudentOutput student_forward(const Model& model, const TrainingBatch& batch);

struct BackpropResult {
  double loss = 0.0;
  double diffusion = 0.0;       // unweighted batch mean of ℓ_dif
  double classification = 0.0;  // unweighted batch mean of ℓ_cls
  GradientBundle grads;
};

// Total loss on the batch and its exact gradient with respect to the
// denoiser weights, L and E. E enters through the target z0 = √d·Eu/‖Eu‖
// of the diffusion term; u, the teacher logits and z_t are constants.
BackpropResult backprop(const DenoiserParams& params, const HeadParams& heads,
                        const TrainingBatch& batch, const LossConfig& config);

// Loss only; same value as backprop(...).loss.
double batch_loss(const DenoiserParams& params, const HeadParams& heads, const TrainingBatch& batch,
                  const LossConfig& config);

struct StepResult {
  double loss = 0.0;
  double diffusion = 0.0;
  double classification = 0.0;
};

// assemble_batch -> backprop -> adam_step.
StepResult train_step(Model& model, OptimizerState& state, const Eigen::MatrixXd& X,
                      const TrainConfig& config, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> nmi;
  std::optional<double> acc;
  std::optional<double> ari;
};

struct TrainOptions {
  // Evaluate on `validation` (or the training set when it has labels)
  // every eval_every epochs and after the last one; 0 disables.
  int eval_every = 0;
  InferenceConfig eval;
  const FeatureDataset* validation = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
};

TrainResult train(const FeatureDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options = {});

// Continues training an existing model for config.epochs more epochs.
TrainResult train(Model model, const FeatureDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options = {});

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace cludi
