#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "cludi/config.hpp"

namespace cludi::cli {

// Bad flag values or config contents; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optional overrides for every TrainConfig field. Unset flags leave the
// value from the config file (or the default) in place.
struct TrainFlags {
  std::optional<int> embed_dim, clusters, views, batch_items, steps, teacher_steps, epochs, hidden,
      hidden_layers, time_dim;
  std::optional<double> f2, lambda, gamma, tau, tau_col, schedule_offset, eps_floor, drop_prob,
      sigma2_low, sigma2_high, learning_rate, beta1, beta2, adam_eps;
  std::optional<std::string> snr_clip_mode;
  std::optional<std::uint64_t> seed;
  bool naive_ce = false;
  std::string config_path;

  void attach(CLI::App& app);

  // File, then flags, then validation.
  TrainConfig resolve() const;
};

}  // namespace cludi::cli
