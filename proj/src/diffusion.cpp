#include "cludi/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cludi/error.hpp"

namespace cludi {

namespace {

void check_timestep(const NoiseSchedule& schedule, int t, int lo, const char* what) {
  if (t < lo || t > schedule.steps()) {
    throw DomainError(std::string(what) + ": timestep " + std::to_string(t) + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(schedule.steps()) + "]");
  }
}

void check_pair(const NoiseSchedule& schedule, int s, int t, const char* what) {
  if (s >= t) {
    throw InvalidArgument(std::string(what) + ": need s < t, got s=" + std::to_string(s) +
                          " t=" + std::to_string(t));
  }
  check_timestep(schedule, s, 0, what);
  check_timestep(schedule, t, 0, what);
}

}  // namespace

NoiseSchedule NoiseSchedule::sqrt_schedule(int steps, double offset, double eps_floor) {
  if (steps < 1) throw InvalidArgument("sqrt_schedule: step count must be positive");
  if (!(offset > 0.0)) throw InvalidArgument("sqrt_schedule: offset must be positive");
  if (!(eps_floor > 0.0) || eps_floor > 1.0) {
    throw InvalidArgument("sqrt_schedule: eps_floor must lie in (0, 1]");
  }
  std::vector<double> table(static_cast<std::size_t>(steps) + 1);
  table[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double raw = 1.0 - std::sqrt(static_cast<double>(t) / steps + offset);
    table[t] = std::max(raw, eps_floor);
  }
  return NoiseSchedule(steps, offset, eps_floor, std::move(table));
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) {
    throw DomainError("alpha_bar: timestep " + std::to_string(t) + " outside schedule");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

NoiseScale::NoiseScale(double f2) : f2_(f2), std_(std::sqrt(f2)) {
  if (!(f2 > 0.0) || !std::isfinite(f2)) throw InvalidArgument("noise scale F2 must be positive");
}

TimeGrid::TimeGrid(std::vector<int> steps) : steps_(std::move(steps)) {
  if (steps_.size() < 2) throw InvalidArgument("time grid needs at least two points");
  if (steps_.back() != 0) throw InvalidArgument("time grid must end at 0");
  for (std::size_t i = 1; i < steps_.size(); ++i) {
    if (steps_[i] >= steps_[i - 1]) throw InvalidArgument("time grid must be strictly decreasing");
  }
}

TimeGrid TimeGrid::equally_spaced(int steps, int n_points) {
  if (steps < 1) throw InvalidArgument("time grid: step count must be positive");
  if (n_points < 2 || n_points > steps + 1) {
    throw InvalidArgument("time grid: n_points must lie in [2, T+1], got " +
                          std::to_string(n_points));
  }
  // round(T·k/(n-1)) in integer arithmetic, ties rounded up
  const long long span = n_points - 1;
  std::vector<int> grid(static_cast<std::size_t>(n_points));
  for (int m = 0; m < n_points; ++m) {
    const long long k = span - m;
    grid[static_cast<std::size_t>(m)] =
        static_cast<int>((2LL * steps * k + span) / (2LL * span));
  }
  return TimeGrid(std::move(grid));
}

double snr(const NoiseSchedule& schedule, int t) {
  check_timestep(schedule, t, 1, "snr");
  const double a = schedule.alpha_bar(t);
  return a / (1.0 - a);
}

double min_snr_weight(double snr_value, double gamma, SnrClip mode) {
  if (!(gamma > 0.0)) throw InvalidArgument("min_snr_weight: gamma must be positive");
  if (!(snr_value >= 0.0)) throw DomainError("min_snr_weight: SNR must be non-negative");
  const double clipped =
      mode == SnrClip::max ? std::max(snr_value, gamma) : std::min(snr_value, gamma);
  return clipped / (snr_value + 1.0);
}

double min_snr_weight(const NoiseSchedule& schedule, int t, double gamma, SnrClip mode) {
  return min_snr_weight(snr(schedule, t), gamma, mode);
}

Eigen::VectorXd forward_noise_with(const Eigen::VectorXd& z0, int t, const NoiseSchedule& schedule,
                                   const NoiseScale& scale, const Eigen::VectorXd& unit_noise) {
  check_timestep(schedule, t, 0, "forward_noise");
  if (unit_noise.size() != z0.size()) throw InvalidArgument("forward_noise: noise size mismatch");
  const double a = schedule.alpha_bar(t);
  if (t == 0) return z0;
  return std::sqrt(a) * z0 + (scale.stddev() * std::sqrt(1.0 - a)) * unit_noise;
}

Eigen::VectorXd forward_noise(const Eigen::VectorXd& z0, int t, const NoiseSchedule& schedule,
                              const NoiseScale& scale, RandomStream& rng) {
  check_timestep(schedule, t, 0, "forward_noise");
  if (t == 0) return z0;
  return forward_noise_with(z0, t, schedule, scale, rng.normal_vector(z0.size()));
}

double ddim_sigma(const NoiseSchedule& schedule, int s, int t) {
  check_pair(schedule, s, t, "ddim_sigma");
  const double as = schedule.alpha_bar(s);
  const double at = schedule.alpha_bar(t);
  const double var = (1.0 - as) / (1.0 - at) * (1.0 - at / as);
  return std::sqrt(std::max(var, 0.0));
}

Eigen::VectorXd epsilon_from_prediction(const Eigen::VectorXd& z_t, const Eigen::VectorXd& z0_pred,
                                        int t, const NoiseSchedule& schedule) {
  check_timestep(schedule, t, 1, "epsilon_from_prediction");
  if (z_t.size() != z0_pred.size()) {
    throw InvalidArgument("epsilon_from_prediction: dimension mismatch");
  }
  const double a = schedule.alpha_bar(t);
  return (z_t - std::sqrt(a) * z0_pred) / std::sqrt(1.0 - a);
}

Eigen::VectorXd ddim_step(const Eigen::VectorXd& z_t, const Eigen::VectorXd& z0_pred, int s, int t,
                          const NoiseSchedule& schedule, const NoiseScale& scale,
                          RandomStream& rng, Sampling mode) {
  check_pair(schedule, s, t, "ddim_step");
  const double as = schedule.alpha_bar(s);
  const double sigma = mode == Sampling::stochastic ? ddim_sigma(schedule, s, t) : 0.0;
  const double eps_coef = std::sqrt(std::max(1.0 - as - sigma * sigma, 0.0));

  Eigen::VectorXd out = std::sqrt(as) * z0_pred;
  if (eps_coef > 0.0) out += eps_coef * epsilon_from_prediction(z_t, z0_pred, t, schedule);
  if (sigma > 0.0) out += (scale.stddev() * sigma) * rng.normal_vector(z_t.size());
  return out;
}

Eigen::VectorXd reverse_sample(const DenoiseFn& denoiser, const Eigen::VectorXd& x,
                               Eigen::Index embed_dim, const TimeGrid& grid,
                               const NoiseSchedule& schedule, const NoiseScale& scale,
                               RandomStream& rng, Sampling mode) {
  if (grid.front() > schedule.steps()) throw InvalidArgument("reverse_sample: grid exceeds T");
  const auto steps = grid.steps();
  Eigen::VectorXd z = scale.stddev() * rng.normal_vector(embed_dim);
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const Eigen::VectorXd z0_pred = denoiser(z, x, steps[i]);
    z = ddim_step(z, z0_pred, steps[i + 1], steps[i], schedule, scale, rng, mode);
  }
  return z;
}

Eigen::MatrixXd reverse_sample_batch(const BatchDenoiseFn& denoiser, const Eigen::MatrixXd& X,
                                     Eigen::Index embed_dim, const TimeGrid& grid,
                                     const NoiseSchedule& schedule, const NoiseScale& scale,
                                     std::span<RandomStream> streams, Sampling mode) {
  if (grid.front() > schedule.steps()) throw InvalidArgument("reverse_sample: grid exceeds T");
  if (static_cast<Eigen::Index>(streams.size()) != X.cols()) {
    throw InvalidArgument("reverse_sample_batch: need one stream per column");
  }
  const auto steps = grid.steps();
  const Eigen::Index cols = X.cols();
  Eigen::MatrixXd Z(embed_dim, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    Z.col(c) = scale.stddev() * streams[static_cast<std::size_t>(c)].normal_vector(embed_dim);
  }
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const Eigen::MatrixXd Z0 = denoiser(Z, X, steps[i]);
    for (Eigen::Index c = 0; c < cols; ++c) {
      Z.col(c) = ddim_step(Z.col(c), Z0.col(c), steps[i + 1], steps[i], schedule, scale,
                           streams[static_cast<std::size_t>(c)], mode);
    }
  }
  return Z;
}

}  // namespace cludi
