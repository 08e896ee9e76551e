#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "cludi/diffusion.hpp"

namespace cludi {

struct LossConfig {
  double lambda = 50.0;  // weight of the class loss
  double gamma = 5.0;    // SNR threshold of the per-item weights
  SnrClip snr_clip = SnrClip::max;
  // Drops the batch-prior regularization and uses the plain symmetric
  // cross-entropy between teacher and student probabilities.
  bool naive_ce = false;

  void validate() const;
};

// Per-item weights w_m, one per sampled timestep.
struct LossWeights {
  std::vector<double> values;
};

LossWeights make_loss_weights(const NoiseSchedule& schedule, std::span<const int> timesteps,
                              double gamma, SnrClip mode = SnrClip::max);

inline constexpr double kProbabilityFloor = 1e-12;

// ‖target - pred‖², summed over coordinates.
double diffusion_loss(const Eigen::VectorXd& target, const Eigen::VectorXd& pred);

// Softmax over the M rows of each column of logits / τ_col.
Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits, double tau_col);

// Row m: p(z_m|k) / Σ_k p(z_m|k), with p(z_m|k) the column softmax.
Eigen::MatrixXd teacher_regularized_probs(const Eigen::MatrixXd& logits, double tau_col);

// Entry (m,k): (M/K)·p_mk / Σ_m' p_m'k.
Eigen::MatrixXd student_regularized_probs(const Eigen::MatrixXd& probs);

// Symmetric class loss per batch item. Both logit matrices are M×K; the
// teacher side is treated as a constant.
//
//   ½ [ -Σ_k q_mk log ŝ_mk  -  Σ_k ŝ'_mk log q'_mk ]
//
// q  = teacher_regularized_probs(teacher_logits)
// ŝ  = student_regularized_probs(softmax(student_logits / τ))
// ŝ' = teacher_regularized_probs(student_logits)
// q' = student_regularized_probs(softmax(teacher_logits / τ))
//
// Logarithms are floored at log(kProbabilityFloor). With config.naive_ce the
// regularized distributions are replaced by the plain row softmaxes.
Eigen::VectorXd class_loss(const Eigen::MatrixXd& teacher_logits,
                           const Eigen::MatrixXd& student_logits, double tau, double tau_col,
                           const LossConfig& config);

struct ClassLossGradient {
  Eigen::VectorXd per_item;        // same as class_loss
  Eigen::MatrixXd student_logits;  // ∂(Σ_m c_m ℓ_m) / ∂ student_logits
};

// class_loss plus the gradient of the coefficient-weighted sum Σ_m c_m ℓ_m.
ClassLossGradient class_loss_backward(const Eigen::MatrixXd& teacher_logits,
                                      const Eigen::MatrixXd& student_logits, double tau,
                                      double tau_col, const LossConfig& config,
                                      const Eigen::VectorXd& coefficients);

// (1/M) Σ_m w_m (ℓ_dif,m + λ ℓ_cls,m), summed in index order.
double total_loss(std::span<const double> dif_terms, std::span<const double> cls_terms,
                  const LossWeights& weights, const LossConfig& config);

}  // namespace cludi
