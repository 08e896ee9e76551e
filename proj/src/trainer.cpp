#include "cludi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "cludi/error.hpp"
#include "cludi/inference.hpp"
#include "cludi/metrics.hpp"
#include "cludi/parallel.hpp"

namespace cludi {

namespace {

// Columns per parallel work unit. Fixed so that results do not depend on the
// number of workers.
constexpr std::size_t kChainBlock = 128;

// Stream ids for the different consumers inside one training step.
enum StreamTag : std::uint64_t { kTeacherTag = 1, kStudentTag = 2 };

Eigen::MatrixXd targets_from(const HeadParams& heads, const Eigen::MatrixXd& probs) {
  Eigen::MatrixXd z0(heads.embed_dim(), probs.cols());
  for (Eigen::Index m = 0; m < probs.cols(); ++m) {
    z0.col(m) = target_embedding(heads, probs.col(m));
  }
  return z0;
}

}  // namespace

Eigen::VectorXd augment_features(const Eigen::VectorXd& x, double drop_prob, double sigma2_low,
                                 double sigma2_high, RandomStream& rng) {
  if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
    throw InvalidArgument("augment_features: drop_prob must lie in [0, 1)");
  }
  if (!(sigma2_low >= 0.0 && sigma2_low <= sigma2_high)) {
    throw InvalidArgument("augment_features: bad variance range");
  }
  Eigen::VectorXd out = x;
  if (drop_prob > 0.0) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      if (rng.uniform() < drop_prob) out[i] = 0.0;
    }
  }
  const double sigma2 = sigma2_low == sigma2_high ? sigma2_low : rng.uniform(sigma2_low, sigma2_high);
  if (sigma2 > 0.0) out += std::sqrt(sigma2) * rng.normal_vector(out.size());
  return out;
}

TeacherTargets teacher_generate(const Model& model, const Eigen::MatrixXd& X, int views,
                                std::uint64_t seed) {
  if (views < 1) throw InvalidArgument("teacher_generate: views must be positive");
  if (X.rows() != model.feature_dim()) throw InvalidArgument("teacher_generate: feature width");
  const Eigen::Index N = X.cols();
  const Eigen::Index M = N * views;
  const TimeGrid grid = TimeGrid::equally_spaced(model.schedule.steps(), model.config.teacher_steps);

  Eigen::MatrixXd repeated(X.rows(), M);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (int b = 0; b < views; ++b) repeated.col(i * views + b) = X.col(i);
  }

  const BatchDenoiseFn denoise = [&model](const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Xc,
                                          int t) { return denoiser_forward(model.denoiser, Z, Xc, t); };

  TeacherTargets out;
  out.denoised.resize(model.embed_dim(), M);
  const std::size_t blocks = (static_cast<std::size_t>(M) + kChainBlock - 1) / kChainBlock;
  parallel_for(blocks, [&](std::size_t first, std::size_t last) {
    for (std::size_t blk = first; blk < last; ++blk) {
      const Eigen::Index begin = static_cast<Eigen::Index>(blk * kChainBlock);
      const Eigen::Index count = std::min<Eigen::Index>(kChainBlock, M - begin);
      std::vector<RandomStream> streams;
      streams.reserve(static_cast<std::size_t>(count));
      for (Eigen::Index c = 0; c < count; ++c) {
        streams.emplace_back(derive_seed(seed, {kTeacherTag, static_cast<std::uint64_t>(begin + c)}));
      }
      out.denoised.middleCols(begin, count) =
          reverse_sample_batch(denoise, repeated.middleCols(begin, count), model.embed_dim(), grid,
                               model.schedule, model.scale, streams);
    }
  });

  const HeadParams& heads = model.heads;
  out.logits = logits_matrix(heads, out.denoised);
  out.probs.resize(heads.clusters(), M);
  for (Eigen::Index m = 0; m < M; ++m) {
    out.probs.col(m) = log_softmax(out.logits.row(m).transpose(), heads.tau).array().exp();
  }
  out.targets = targets_from(heads, out.probs);
  return out;
}

TrainingBatch assemble_batch(const Model& model, const Eigen::MatrixXd& X, const TrainConfig& config,
                             std::uint64_t seed) {
  TeacherTargets teacher = teacher_generate(model, X, config.views, seed);
  const Eigen::Index M = teacher.denoised.cols();

  TrainingBatch batch;
  batch.features.resize(X.rows(), M);
  batch.noised.resize(model.embed_dim(), M);
  batch.timesteps.resize(static_cast<std::size_t>(M));

  RandomStream rng(derive_seed(seed, {kStudentTag}));
  for (Eigen::Index m = 0; m < M; ++m) {
    const Eigen::Index item = m / config.views;
    batch.features.col(m) = augment_features(X.col(item), config.drop_prob, config.sigma2_low,
                                             config.sigma2_high, rng);
    const int t = static_cast<int>(rng.integer(1, model.schedule.steps()));
    batch.timesteps[static_cast<std::size_t>(m)] = t;
    batch.noised.col(m) =
        forward_noise(teacher.targets.col(m), t, model.schedule, model.scale, rng);
  }
  batch.weights =
      make_loss_weights(model.schedule, batch.timesteps, config.gamma, config.snr_clip);
  batch.teacher_probs = std::move(teacher.probs);
  batch.teacher_logits = std::move(teacher.logits);
  batch.targets = std::move(teacher.targets);
  return batch;
}

StudentOutput student_forward(const Model& model, const TrainingBatch& batch) {
  StudentOutput out;
  out.z0_pred = denoiser_forward(model.denoiser, batch.noised, batch.features, batch.timesteps);
  out.denoiser_evaluations = static_cast<std::size_t>(batch.noised.cols());
  const Eigen::MatrixXd logits = logits_matrix(model.heads, out.z0_pred);
  out.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index m = 0; m < logits.rows(); ++m) {
    out.probs.row(m) = log_softmax(logits.row(m).transpose(), model.heads.tau).array().exp();
  }
  return out;
}

BackpropResult backprop(const DenoiserParams& params, const HeadParams& heads,
                        const TrainingBatch& batch, const LossConfig& config) {
  const Eigen::Index M = batch.size();
  const Eigen::Index d = heads.embed_dim();
  if (M < 1) throw InvalidArgument("backprop: empty batch");
  if (batch.teacher_probs.cols() != M || batch.teacher_logits.rows() != M ||
      batch.noised.cols() != M || static_cast<Eigen::Index>(batch.timesteps.size()) != M ||
      static_cast<Eigen::Index>(batch.weights.values.size()) != M) {
    throw InvalidArgument("backprop: batch fields disagree on the item count");
  }

  const ForwardCache cache =
      denoiser_forward_cached(params, batch.noised, batch.features, batch.timesteps);
  const Eigen::MatrixXd& z_hat = cache.output;
  if (!z_hat.allFinite()) throw NumericalFailure("denoiser", "non-finite prediction");

  // Target z0 = √d·v/‖v‖ with v = E·u, recomputed so that E is differentiable.
  const Eigen::MatrixXd v = heads.embed * batch.teacher_probs;
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  Eigen::VectorXd norms(M);
  Eigen::MatrixXd z0(d, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    norms[m] = v.col(m).norm();
    if (!(norms[m] > 0.0)) throw DegenerateTarget("backprop: E·u is the zero vector");
    z0.col(m) = sqrt_d * v.col(m) / norms[m];
  }

  const Eigen::MatrixXd diff = z0 - z_hat;
  std::vector<double> dif(static_cast<std::size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) dif[static_cast<std::size_t>(m)] = diff.col(m).squaredNorm();

  const Eigen::MatrixXd student_logits = (heads.logits * z_hat).transpose();
  Eigen::VectorXd coef(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    coef[m] = batch.weights.values[static_cast<std::size_t>(m)] * config.lambda / static_cast<double>(M);
  }
  const ClassLossGradient cls = class_loss_backward(batch.teacher_logits, student_logits, heads.tau,
                                                    heads.tau_col, config, coef);
  const std::vector<double> cls_terms(cls.per_item.data(), cls.per_item.data() + M);

  BackpropResult out;
  out.loss = total_loss(dif, cls_terms, batch.weights, config);
  out.diffusion = std::accumulate(dif.begin(), dif.end(), 0.0) / static_cast<double>(M);
  out.classification = cls.per_item.mean();

  // ∂/∂ẑ and ∂/∂z0 of (1/M) Σ w_m ‖z0_m - ẑ_m‖².
  Eigen::MatrixXd g_target(d, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    g_target.col(m) =
        (2.0 * batch.weights.values[static_cast<std::size_t>(m)] / static_cast<double>(M)) *
        diff.col(m);
  }
  Eigen::MatrixXd g_zhat = -g_target + heads.logits.transpose() * cls.student_logits.transpose();

  out.grads.logits = cls.student_logits.transpose() * z_hat.transpose();

  // z0 = √d·v/‖v‖  =>  ∂z0/∂v = (√d/‖v‖)(I - v̂v̂ᵀ)
  Eigen::MatrixXd g_v(d, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const Eigen::VectorXd vhat = v.col(m) / norms[m];
    const Eigen::VectorXd g = g_target.col(m);
    g_v.col(m) = (sqrt_d / norms[m]) * (g - vhat * vhat.dot(g));
  }
  out.grads.embed = g_v * batch.teacher_probs.transpose();

  out.grads.denoiser = denoiser_backward(params, cache, g_zhat);
  if (!out.grads.all_finite()) throw NumericalFailure("backprop", "non-finite gradient");
  return out;
}

double batch_loss(const DenoiserParams& params, const HeadParams& heads, const TrainingBatch& batch,
                  const LossConfig& config) {
  const Eigen::MatrixXd z_hat =
      denoiser_forward(params, batch.noised, batch.features, batch.timesteps);
  const Eigen::Index M = batch.size();
  std::vector<double> dif(static_cast<std::size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) {
    const Eigen::VectorXd z0 = target_embedding(heads, batch.teacher_probs.col(m));
    dif[static_cast<std::size_t>(m)] = diffusion_loss(z0, z_hat.col(m));
  }
  const Eigen::VectorXd cls = class_loss(batch.teacher_logits, logits_matrix(heads, z_hat),
                                         heads.tau, heads.tau_col, config);
  const std::vector<double> cls_terms(cls.data(), cls.data() + M);
  return total_loss(dif, cls_terms, batch.weights, config);
}

StepResult train_step(Model& model, OptimizerState& state, const Eigen::MatrixXd& X,
                      const TrainConfig& config, std::uint64_t seed) {
  const TrainingBatch batch = assemble_batch(model, X, config, seed);
  const BackpropResult r = backprop(model.denoiser, model.heads, batch, config.loss());
  adam_step(model.denoiser, model.heads, r.grads, state);
  return {r.loss, r.diffusion, r.classification};
}

TrainResult train(const FeatureDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options) {
  dataset.validate();
  return train(Model::init(config, static_cast<int>(dataset.dim())), dataset, config, options);
}

TrainResult train(Model model, const FeatureDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  dataset.validate();
  if (dataset.dim() != model.feature_dim()) {
    throw InvalidArgument("train: dataset width does not match the model");
  }
  const FeatureDataset* eval_set = options.validation ? options.validation : &dataset;
  const bool can_eval = options.eval_every > 0 && eval_set->labels.has_value();

  OptimizerState state = OptimizerState::init(
      model.denoiser, model.heads,
      AdamConfig{config.learning_rate, config.beta1, config.beta2, config.adam_eps});

  const Eigen::MatrixXd features_t = dataset.features.transpose();  // n×N
  const auto N = static_cast<std::size_t>(dataset.size());
  std::vector<Eigen::Index> order(N);

  TrainResult result{std::move(model), {}};
  result.history.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    RandomStream shuffle(derive_seed(config.seed, {0x5348554646ull, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle.engine());

    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < N; start += static_cast<std::size_t>(config.batch_items)) {
      const std::size_t count = std::min(N - start, static_cast<std::size_t>(config.batch_items));
      Eigen::MatrixXd X(features_t.rows(), static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        X.col(static_cast<Eigen::Index>(i)) = features_t.col(order[start + i]);
      }
      const std::uint64_t step_seed = derive_seed(
          config.seed, {0x53544550ull, static_cast<std::uint64_t>(epoch), start});
      loss_sum += train_step(result.model, state, X, config, step_seed).loss;
      ++steps;
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.loss = loss_sum / std::max(steps, 1);
    const bool last = epoch + 1 == config.epochs;
    if (can_eval && ((epoch + 1) % options.eval_every == 0 || last)) {
      const BatchClassification c = classify_batch(result.model, eval_set->features, options.eval);
      record.nmi = nmi(c.labels, *eval_set->labels);
      record.acc = accuracy_hungarian(c.labels, *eval_set->labels);
      record.ari = ari(c.labels, *eval_set->labels);
    }
    if (options.on_epoch) options.on_epoch(record);
    result.history.push_back(record);
  }
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(10) << "epoch,loss,nmi,acc,ari\n";
  auto opt = [&out](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : history) {
    out << r.epoch << ',' << r.loss << ',';
    opt(r.nmi);
    out << ',';
    opt(r.acc);
    out << ',';
    opt(r.ari);
    out << '\n';
  }
}

}  // namespace cludi
