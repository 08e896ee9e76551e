#include "cludi/config.hpp"

#include <cmath>

#include "cludi/error.hpp"

namespace cludi {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("train config: ") + what);
  };
  require(embed_dim >= 1, "embed_dim must be positive");
  require(clusters >= 1, "clusters (K) must be given");
  require(f2 > 0.0 && std::isfinite(f2), "f2 must be positive");
  require(tau > 0.0 && tau_col > 0.0, "temperatures must be positive");
  require(views >= 1, "views must be positive");
  require(batch_items >= 1, "batch_items must be positive");
  require(steps >= 1, "steps must be positive");
  require(schedule_offset > 0.0, "schedule_offset must be positive");
  require(eps_floor > 0.0 && eps_floor <= 1.0, "eps_floor must lie in (0, 1]");
  require(teacher_steps >= 2 && teacher_steps <= steps + 1, "teacher_steps must lie in [2, T+1]");
  require(drop_prob >= 0.0 && drop_prob < 1.0, "drop_prob must lie in [0, 1)");
  require(sigma2_low >= 0.0 && sigma2_low <= sigma2_high, "sigma2 range must be ordered, >= 0");
  require(epochs >= 0, "epochs must be non-negative");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(hidden >= 1 && hidden_layers >= 1, "hidden sizes must be positive");
  require(time_dim >= 2 && time_dim % 2 == 0, "time_dim must be even");
  loss().validate();
}

void InferenceConfig::validate(int schedule_steps) const {
  if (chains < 1) throw InvalidArgument("inference config: chains must be >= 1");
  if (steps < 2 || steps > schedule_steps + 1) {
    throw InvalidArgument("inference config: steps must lie in [2, T+1]");
  }
}

std::string to_string(SnrClip mode) { return mode == SnrClip::max ? "max" : "min"; }

SnrClip snr_clip_from_string(const std::string& s) {
  if (s == "max") return SnrClip::max;
  if (s == "min") return SnrClip::min;
  throw InvalidArgument("snr_clip_mode must be 'max' or 'min', got '" + s + "'");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},
                     {"clusters", c.clusters},
                     {"f2", c.f2},
                     {"lambda", c.lambda},
                     {"gamma", c.gamma},
                     {"snr_clip_mode", to_string(c.snr_clip)},
                     {"naive_ce", c.naive_ce},
                     {"tau", c.tau},
                     {"tau_col", c.tau_col},
                     {"views", c.views},
                     {"batch_items", c.batch_items},
                     {"steps", c.steps},
                     {"schedule_offset", c.schedule_offset},
                     {"eps_floor", c.eps_floor},
                     {"teacher_steps", c.teacher_steps},
                     {"drop_prob", c.drop_prob},
                     {"sigma2_low", c.sigma2_low},
                     {"sigma2_high", c.sigma2_high},
                     {"epochs", c.epochs},
                     {"learning_rate", c.learning_rate},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"hidden", c.hidden},
                     {"hidden_layers", c.hidden_layers},
                     {"time_dim", c.time_dim},
                     {"seed", c.seed}};
}

// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("embed_dim", c.embed_dim);
  get("clusters", c.clusters);
  get("f2", c.f2);
  get("lambda", c.lambda);
  get("gamma", c.gamma);
  if (j.contains("snr_clip_mode")) c.snr_clip = snr_clip_from_string(j.at("snr_clip_mode"));
  get("naive_ce", c.naive_ce);
  get("tau", c.tau);
  get("tau_col", c.tau_col);
  get("views", c.views);
  get("batch_items", c.batch_items);
  get("steps", c.steps);
  get("schedule_offset", c.schedule_offset);
  get("eps_floor", c.eps_floor);
  get("teacher_steps", c.teacher_steps);
  get("drop_prob", c.drop_prob);
  get("sigma2_low", c.sigma2_low);
  get("sigma2_high", c.sigma2_high);
  get("epochs", c.epochs);
  get("learning_rate", c.learning_rate);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  get("hidden", c.hidden);
  get("hidden_layers", c.hidden_layers);
  get("time_dim", c.time_dim);
  get("seed", c.seed);
}

void to_json(nlohmann::json& j, const InferenceConfig& c) {
  j = nlohmann::json{{"chains", c.chains}, {"steps", c.steps}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, InferenceConfig& c) {
  if (j.contains("chains")) j.at("chains").get_to(c.chains);
  if (j.contains("steps")) j.at("steps").get_to(c.steps);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

}  // namespace cludi
