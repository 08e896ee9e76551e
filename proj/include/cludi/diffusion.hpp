#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cludi/rng.hpp"

namespace cludi {

// Cumulative signal fractions ᾱ_0..ᾱ_T. Immutable once built.
class NoiseSchedule {
 public:
  // ᾱ_0 = 1, ᾱ_t = max(1 - sqrt(t/T + offset), eps_floor) for t >= 1.
  static NoiseSchedule sqrt_schedule(int steps, double offset = 1e-4, double eps_floor = 1e-5);

  int steps() const noexcept { return steps_; }
  double offset() const noexcept { return offset_; }
  double eps_floor() const noexcept { return eps_floor_; }

  double alpha_bar(int t) const;
  std::span<const double> table() const noexcept { return alpha_bar_; }

 private:
  NoiseSchedule(int steps, double offset, double eps_floor, std::vector<double> table)
      : steps_(steps), offset_(offset), eps_floor_(eps_floor), alpha_bar_(std::move(table)) {}

  int steps_;
  double offset_;
  double eps_floor_;
  std::vector<double> alpha_bar_;
};

// F²: multiplies the variance of every latent-space Gaussian.
class NoiseScale {
 public:
  explicit NoiseScale(double f2);
  double variance() const noexcept { return f2_; }
  double stddev() const noexcept { return std_; }

 private:
  double f2_;
  double std_;
};

// Strictly decreasing timesteps ending at 0.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<int> steps);

  // n_points equally spaced (rounded) steps from T down to 0.
  static TimeGrid equally_spaced(int steps, int n_points);

  std::span<const int> steps() const noexcept { return steps_; }
  std::size_t size() const noexcept { return steps_.size(); }
  int front() const { return steps_.front(); }

 private:
  std::vector<int> steps_;
};

enum class SnrClip { max, min };

double snr(const NoiseSchedule& schedule, int t);

// max(SNR_t, γ) / (SNR_t + 1) in the default mode; min(...) in SnrClip::min.
double min_snr_weight(const NoiseSchedule& schedule, int t, double gamma,
                      SnrClip mode = SnrClip::max);

// Same weight from an SNR value.
double min_snr_weight(double snr_value, double gamma, SnrClip mode = SnrClip::max);

// Draw from N(sqrt(ᾱ_t)·z0, (1-ᾱ_t)·F²·I).
Eigen::VectorXd forward_noise(const Eigen::VectorXd& z0, int t, const NoiseSchedule& schedule,
                              const NoiseScale& scale, RandomStream& rng);

// Same as forward_noise but with a caller-supplied standard normal vector.
Eigen::VectorXd forward_noise_with(const Eigen::VectorXd& z0, int t, const NoiseSchedule& schedule,
                                   const NoiseScale& scale, const Eigen::VectorXd& unit_noise);

// σ_{s|t} of the stochastic DDIM step.
double ddim_sigma(const NoiseSchedule& schedule, int s, int t);

// ε̂ = (z_t - sqrt(ᾱ_t)·ẑ_0) / sqrt(1-ᾱ_t). Defined for t >= 1.
Eigen::VectorXd epsilon_from_prediction(const Eigen::VectorXd& z_t, const Eigen::VectorXd& z0_pred,
                                        int t, const NoiseSchedule& schedule);

enum class Sampling { stochastic, deterministic };

// One reverse jump t -> s (s < t). Deterministic mode forces σ_{s|t} = 0.
Eigen::VectorXd ddim_step(const Eigen::VectorXd& z_t, const Eigen::VectorXd& z0_pred, int s, int t,
                          const NoiseSchedule& schedule, const NoiseScale& scale,
                          RandomStream& rng, Sampling mode = Sampling::stochastic);

// Predicts ẑ_0 for one embedding given features and timestep.
using DenoiseFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& z_t, const Eigen::VectorXd& x, int t)>;

// Batched form: columns of Z and X are items, all evaluated at the same t.
using BatchDenoiseFn =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& X, int t)>;

// z_{t_0} ~ N(0, F²·I_d), then ddim_step along consecutive grid pairs.
Eigen::VectorXd reverse_sample(const DenoiseFn& denoiser, const Eigen::VectorXd& x,
                               Eigen::Index embed_dim, const TimeGrid& grid,
                               const NoiseSchedule& schedule, const NoiseScale& scale,
                               RandomStream& rng, Sampling mode = Sampling::stochastic);

// Runs one chain per column of X. Column c draws all of its noise from
// streams[c], so the result of a column does not depend on the others.
Eigen::MatrixXd reverse_sample_batch(const BatchDenoiseFn& denoiser, const Eigen::MatrixXd& X,
                                     Eigen::Index embed_dim, const TimeGrid& grid,
                                     const NoiseSchedule& schedule, const NoiseScale& scale,
                                     std::span<RandomStream> streams,
                                     Sampling mode = Sampling::stochastic);

}  // namespace cludi
