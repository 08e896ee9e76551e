#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cludi/data.hpp"
#include "cludi/error.hpp"
#include "cludi/inference.hpp"
#include "cludi/metrics.hpp"
#include "cludi/model.hpp"
#include "cludi/trainer.hpp"
#include "train_flags.hpp"

namespace cludi::cli {

namespace fs = std::filesystem;

namespace {

struct DataFlags {
  std::string path;
  bool csv_labels = false;
  bool standardize = false;

  void attach(CLI::App& app) {
    app.add_option("--data", path, "dataset (.csv or CLDF)")->required()->check(CLI::ExistingFile);
    app.add_flag("--csv-labels", csv_labels, "last CSV column holds integer labels");
    app.add_flag("--standardize", standardize, "standardize every feature column");
  }

  FeatureDataset load() const {
    FeatureDataset ds = load_dataset(path, csv_labels);
    if (standardize) cludi::standardize(ds);
    return ds;
  }
};

// Grid points when not given: 100, or every step of shorter schedules.
int default_grid(std::optional<int> steps, int schedule_steps) {
  return steps ? *steps : std::min(100, schedule_steps + 1);
}

struct InferenceFlags {
  int chains = 8;
  std::optional<int> steps;
  std::uint64_t seed = 0;

  void attach(CLI::App& app, const std::string& prefix = "") {
    app.add_option("--" + prefix + "chains", chains, "reverse chains per input (B)")
        ->capture_default_str();
    app.add_option("--" + prefix + "steps", steps, "sampling grid points (default 100)");
    if (prefix.empty()) app.add_option("--seed", seed, "sampling seed")->capture_default_str();
  }

  InferenceConfig config(int schedule_steps) const {
    return {chains, default_grid(steps, schedule_steps), seed};
  }
};

Model load_model_for(const std::string& path, const FeatureDataset& data) {
  Model m = load_checkpoint(path);
  if (m.feature_dim() != data.dim()) {
    throw UsageError("dataset has " + std::to_string(data.dim()) +
                     " feature columns but the model expects " + std::to_string(m.feature_dim()));
  }
  return m;
}

void check_inference(const InferenceConfig& c, int schedule_steps) {
  try {
    c.validate(schedule_steps);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw UsageError("not an integer list: '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw UsageError("not a number list: '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("grid is empty");
  return out;
}

void print_epoch(const EpochRecord& r) {
  std::fprintf(stderr, "epoch %d loss %.6g", r.epoch, r.loss);
  if (r.acc) std::fprintf(stderr, " acc %.4f nmi %.4f ari %.4f", *r.acc, *r.nmi, *r.ari);
  std::fprintf(stderr, "\n");
}

nlohmann::json metrics_report(const std::vector<int>& pred, const std::vector<int>& truth,
                              const InferenceConfig& c) {
  return {{"b", c.chains},
          {"steps", c.steps},
          {"seed", c.seed},
          {"n", pred.size()},
          {"acc", accuracy_hungarian(pred, truth)},
          {"nmi", nmi(pred, truth)},
          {"ari", ari(pred, truth)},
          {"k_pred", count_clusters(pred)},
          {"k_true", count_clusters(truth)}};
}

}  // namespace

void register_generate(CLI::App& app) {
  auto* cmd = app.add_subcommand("generate", "write a synthetic Gaussian mixture");
  auto spec = std::make_shared<MixtureSpec>();
  auto out = std::make_shared<std::string>();
  auto dtype = std::make_shared<std::string>("f64");
  cmd->add_option("--k", spec->clusters, "components")->required();
  cmd->add_option("--dim", spec->dim, "feature width")->required();
  cmd->add_option("--per", spec->per_cluster, "samples per component")->required();
  cmd->add_option("--radius", spec->center_radius, "distance of centers from the origin")
      ->capture_default_str();
  cmd->add_option("--noise", spec->noise_std, "per-coordinate noise std")->capture_default_str();
  cmd->add_option("--seed", spec->seed)->capture_default_str();
  cmd->add_option("--out", *out, "output path; .csv writes CSV with a label column")->required();
  cmd->add_option("--dtype", *dtype, "CLDF payload type")->check(CLI::IsMember({"f64", "f32"}));
  cmd->callback([=] {
    FeatureDataset ds;
    try {
      ds = generate_mixture(*spec);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    if (fs::path(*out).extension() == ".csv") {
      write_csv_features(ds, *out);
    } else {
      write_cldf(ds, *out, *dtype == "f32" ? CldfDtype::f32 : CldfDtype::f64);
    }
    std::fprintf(stderr, "wrote %lld x %lld to %s\n", static_cast<long long>(ds.size()),
                 static_cast<long long>(ds.dim()), out->c_str());
  });
}

void register_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  auto flags = std::make_shared<TrainFlags>();
  auto data = std::make_shared<DataFlags>();
  auto eval = std::make_shared<InferenceFlags>();
  auto out = std::make_shared<std::string>();
  auto history = std::make_shared<std::string>();
  auto eval_every = std::make_shared<int>(0);
  auto quiet = std::make_shared<bool>(false);
  data->attach(*cmd);
  flags->attach(*cmd);
  eval->attach(*cmd, "eval-");
  cmd->add_option("--out", *out, "checkpoint path")->required();
  cmd->add_option("--history", *history, "history CSV (default: <out>.history.csv)");
  cmd->add_option("--eval-every", *eval_every, "evaluate every N epochs (needs labels)");
  cmd->add_flag("--quiet", *quiet, "no per-epoch log");
  cmd->callback([=] {
    const TrainConfig config = flags->resolve();
    TrainOptions opt;
    opt.eval = eval->config(config.steps);
    opt.eval.seed = config.seed;
    check_inference(opt.eval, config.steps);
    const FeatureDataset ds = data->load();
    opt.eval_every = ds.labels ? *eval_every : 0;
    if (!*quiet) opt.on_epoch = print_epoch;
    TrainResult r = train(ds, config, opt);
    save_checkpoint(r.model, *out);
    const fs::path hist = history->empty() ? fs::path(*out + ".history.csv") : fs::path(*history);
    write_history_csv(r.history, hist);
    if (ds.labels) {
      const auto cls = classify_batch(r.model, ds.features, opt.eval);
      std::printf("%s\n", metrics_report(cls.labels, *ds.labels, opt.eval).dump().c_str());
    }
  });
}

void register_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "ACC, NMI and ARI of a checkpoint on labeled data");
  auto data = std::make_shared<DataFlags>();
  auto model_path = std::make_shared<std::string>();
  auto b_list = std::make_shared<std::string>("8");
  auto steps = std::make_shared<std::optional<int>>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  data->attach(*cmd);
  cmd->add_option("--model", *model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--b,--chains", *b_list, "comma-separated chain counts, one report each")
      ->capture_default_str();
  cmd->add_option("--steps", *steps, "sampling grid points (default 100)");
  cmd->add_option("--seed", *seed)->capture_default_str();
  cmd->add_option("--out", *out, "also write the reports as a JSON array");
  cmd->callback([=] {
    const FeatureDataset ds = data->load();
    if (!ds.labels) throw UsageError("eval needs labels (CLDF label block or --csv-labels)");
    const Model model = load_model_for(*model_path, ds);
    const auto chains = parse_int_list(*b_list);
    const int grid = default_grid(*steps, model.schedule.steps());
    for (int b : chains) check_inference({b, grid, *seed}, model.schedule.steps());
    nlohmann::json all = nlohmann::json::array();
    for (int b : chains) {
      const InferenceConfig c{b, grid, *seed};
      const auto cls = classify_batch(model, ds.features, c);
      const auto rep = metrics_report(cls.labels, *ds.labels, c);
      std::printf("%s\n", rep.dump().c_str());
      std::fflush(stdout);
      all.push_back(rep);
    }
    if (!out->empty()) {
      std::ofstream f(*out);
      if (!f) throw FormatError("cannot open '" + *out + "' for writing");
      f << all.dump(2) << '\n';
    }
  });
}

void register_infer(CLI::App& app) {
  auto* cmd = app.add_subcommand("infer", "predicted labels and cluster probabilities as CSV");
  auto data = std::make_shared<DataFlags>();
  auto inf = std::make_shared<InferenceFlags>();
  auto model_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  data->attach(*cmd);
  inf->attach(*cmd);
  cmd->add_option("--model", *model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "CSV path")->required();
  cmd->callback([=] {
    const FeatureDataset ds = data->load();
    const Model model = load_model_for(*model_path, ds);
    const InferenceConfig c = inf->config(model.schedule.steps());
    check_inference(c, model.schedule.steps());
    write_predictions_csv(classify_batch(model, ds.features, c), *out);
  });
}

void register_export_embeddings(CLI::App& app) {
  auto* cmd = app.add_subcommand("export-embeddings", "per-item mean of the sampled embeddings");
  auto data = std::make_shared<DataFlags>();
  auto inf = std::make_shared<InferenceFlags>();
  auto model_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  data->attach(*cmd);
  inf->attach(*cmd);
  cmd->add_option("--model", *model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "CSV path")->required();
  cmd->callback([=] {
    const FeatureDataset ds = data->load();
    const Model model = load_model_for(*model_path, ds);
    const InferenceConfig c = inf->config(model.schedule.steps());
    check_inference(c, model.schedule.steps());
    write_embeddings_csv(export_embeddings(model, ds.features, c), *out);
  });
}

void register_ablate(CLI::App& app) {
  auto* cmd = app.add_subcommand("ablate", "train one model per grid value, record best metrics");
  auto flags = std::make_shared<TrainFlags>();
  auto data = std::make_shared<DataFlags>();
  auto eval = std::make_shared<InferenceFlags>();
  auto param = std::make_shared<std::string>();
  auto grid = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto eval_every = std::make_shared<int>(1);
  auto quiet = std::make_shared<bool>(false);
  data->attach(*cmd);
  flags->attach(*cmd);
  eval->attach(*cmd, "eval-");
  cmd->add_option("--param", *param, "scanned field")
      ->required()
      ->check(CLI::IsMember({"lambda", "f2", "d"}));
  cmd->add_option("--grid", *grid, "comma-separated values")->required();
  cmd->add_option("--out", *out, "CSV path")->required();
  cmd->add_option("--eval-every", *eval_every, "evaluation interval in epochs")
      ->capture_default_str();
  cmd->add_flag("--quiet", *quiet, "no per-epoch log");
  cmd->callback([=] {
    const TrainConfig base = flags->resolve();
    const auto values = parse_double_list(*grid);
    if (*param == "d") {
      for (double v : values) {
        if (v < 1 || v != std::floor(v)) throw UsageError("d grid needs positive integers");
      }
    }
    if (*eval_every < 1) throw UsageError("--eval-every must be >= 1");
    check_inference(eval->config(base.steps), base.steps);
    const FeatureDataset ds = data->load();
    if (!ds.labels) throw UsageError("ablate needs labels (CLDF label block or --csv-labels)");

    std::ofstream csv(*out);
    if (!csv) throw FormatError("cannot open '" + *out + "' for writing");
    csv << "param,value,max_nmi,max_acc,max_ari,status\n" << std::setprecision(10);
    for (double v : values) {
      TrainConfig cfg = base;
      if (*param == "lambda") cfg.lambda = v;
      if (*param == "f2") cfg.f2 = v;
      if (*param == "d") cfg.embed_dim = static_cast<int>(v);
      if (!*quiet) std::fprintf(stderr, "%s = %g\n", param->c_str(), v);
      TrainOptions opt;
      opt.eval_every = *eval_every;
      opt.eval = eval->config(cfg.steps);
      opt.eval.seed = cfg.seed;
      if (!*quiet) opt.on_epoch = print_epoch;
      csv << *param << ',' << v << ',';
      try {
        cfg.validate();
        const TrainResult r = train(ds, cfg, opt);
        double best_nmi = 0, best_acc = 0, best_ari = -1;
        for (const auto& e : r.history) {
          if (!e.acc) continue;
          best_nmi = std::max(best_nmi, *e.nmi);
          best_acc = std::max(best_acc, *e.acc);
          best_ari = std::max(best_ari, *e.ari);
        }
        csv << best_nmi << ',' << best_acc << ',' << best_ari << ",ok\n";
      } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        csv << ",,,failed: " << msg << '\n';
        std::fprintf(stderr, "cell %s=%g failed: %s\n", param->c_str(), v, e.what());
      }
      csv.flush();
    }
  });
}

}  // namespace cludi::cli
