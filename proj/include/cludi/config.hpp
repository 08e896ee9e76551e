#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cludi/losses.hpp"

namespace cludi {

// Everything needed to build and train a model. Defaults follow the
// large-K setting (d=64, F²=25, λ=50, γ=5); use d=32 for small K.
struct TrainConfig {
  int embed_dim = 64;        // d
  int clusters = 0;          // K, required
  double f2 = 25.0;          // F²
  double lambda = 50.0;
  double gamma = 5.0;
  SnrClip snr_clip = SnrClip::max;
  bool naive_ce = false;
  double tau = 0.1;
  double tau_col = 0.05;
  int views = 4;             // B, augmented views per item
  int batch_items = 128;     // N, distinct items per minibatch
  int steps = 1000;          // T
  double schedule_offset = 1e-4;
  double eps_floor = 1e-5;
  int teacher_steps = 25;    // teacher grid points
  double drop_prob = 0.2;
  double sigma2_low = 0.1;
  double sigma2_high = 0.3;
  int epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int hidden = 512;
  int hidden_layers = 2;
  int time_dim = 64;
  std::uint64_t seed = 0;

  LossConfig loss() const { return {lambda, gamma, snr_clip, naive_ce}; }
  void validate() const;
};

struct InferenceConfig {
  int chains = 8;   // B, reverse chains per input
  int steps = 100;  // grid points
  std::uint64_t seed = 0;

  void validate(int schedule_steps) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const InferenceConfig& c);
void from_json(const nlohmann::json& j, InferenceConfig& c);

std::string to_string(SnrClip mode);
SnrClip snr_clip_from_string(const std::string& s);

}  // namespace cludi
