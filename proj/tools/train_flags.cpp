#include "train_flags.hpp"

#include <fstream>

#include "cludi/error.hpp"

namespace cludi::cli {

void TrainFlags::attach(CLI::App& app) {
  app.add_option("--config", config_path, "JSON file with TrainConfig fields")
      ->check(CLI::ExistingFile);
  app.add_option("--clusters", clusters, "number of clusters K");
  app.add_option("--embed-dim", embed_dim, "assignment embedding width d");
  app.add_option("--f2", f2, "latent noise variance scale F^2");
  app.add_option("--lambda", lambda, "weight of the class loss");
  app.add_option("--gamma", gamma, "SNR threshold of the loss weights");
  app.add_option("--snr-clip-mode", snr_clip_mode, "max or min")
      ->check(CLI::IsMember({"max", "min"}));
  app.add_flag("--naive-ce", naive_ce, "unregularized symmetric cross-entropy (ablation)");
  app.add_option("--tau", tau, "softmax temperature");
  app.add_option("--tau-col", tau_col, "column softmax temperature");
  app.add_option("--views", views, "augmented views per item");
  app.add_option("--batch-items", batch_items, "distinct items per minibatch");
  app.add_option("--steps", steps, "diffusion steps T");
  app.add_option("--schedule-offset", schedule_offset);
  app.add_option("--eps-floor", eps_floor);
  app.add_option("--teacher-steps", teacher_steps, "teacher sampling grid points");
  app.add_option("--drop-prob", drop_prob, "feature dropout probability");
  app.add_option("--sigma2-low", sigma2_low);
  app.add_option("--sigma2-high", sigma2_high);
  app.add_option("--epochs", epochs);
  app.add_option("--learning-rate", learning_rate);
  app.add_option("--beta1", beta1);
  app.add_option("--beta2", beta2);
  app.add_option("--adam-eps", adam_eps);
  app.add_option("--hidden", hidden, "denoiser hidden width");
  app.add_option("--hidden-layers", hidden_layers);
  app.add_option("--time-dim", time_dim, "time embedding width");
  app.add_option("--seed", seed);
}

TrainConfig TrainFlags::resolve() const {
  TrainConfig c;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config '" + config_path + "'");
    try {
      const auto j = nlohmann::json::parse(in);
      const nlohmann::json known = TrainConfig{};
      if (!j.is_object()) throw UsageError("config '" + config_path + "' is not a JSON object");
      for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw UsageError("config '" + config_path + "': unknown key '" + key + "'");
      }
      c = j.get<TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config '" + config_path + "': " + e.what());
    } catch (const InvalidArgument& e) {
      throw UsageError("config '" + config_path + "': " + e.what());
    }
  }
  auto set = [](auto& field, const auto& flag) {
    if (flag) field = *flag;
  };
  set(c.embed_dim, embed_dim);
  set(c.clusters, clusters);
  set(c.f2, f2);
  set(c.lambda, lambda);
  set(c.gamma, gamma);
  if (snr_clip_mode) c.snr_clip = snr_clip_from_string(*snr_clip_mode);
  if (naive_ce) c.naive_ce = true;
  set(c.tau, tau);
  set(c.tau_col, tau_col);
  set(c.views, views);
  set(c.batch_items, batch_items);
  set(c.steps, steps);
  set(c.schedule_offset, schedule_offset);
  set(c.eps_floor, eps_floor);
  set(c.teacher_steps, teacher_steps);
  set(c.drop_prob, drop_prob);
  set(c.sigma2_low, sigma2_low);
  set(c.sigma2_high, sigma2_high);
  set(c.epochs, epochs);
  set(c.learning_rate, learning_rate);
  set(c.beta1, beta1);
  set(c.beta2, beta2);
  set(c.adam_eps, adam_eps);
  set(c.hidden, hidden);
  set(c.hidden_layers, hidden_layers);
  set(c.time_dim, time_dim);
  set(c.seed, seed);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

}  // namespace cludi::cli
