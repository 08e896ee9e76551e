#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cludi/trainer.hpp"
#include "fixtures.hpp"

using namespace cludi;
using doctest::Approx;

TEST_CASE("augmentation") {
  RandomStream rng(1);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2000, 3.0);
  const auto y = augment_features(x, 0.2, 0.1, 0.3, rng);
  int dropped = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(y[i]) < 2.0) ++dropped;
  }
  CHECK(dropped > 300);
  CHECK(dropped < 500);
  RandomStream rng2(1);
  const auto clean = augment_features(x, 0.0, 0.0, 0.0, rng2);
  CHECK((clean - x).norm() == 0.0);
}

TEST_CASE("teacher targets are normalized and probabilities sum to one") {
  const auto cfg = testing::tiny_config();
  const Model model = Model::init(cfg, 6);
  const auto X = testing::tiny_features(3);
  const auto t = teacher_generate(model, X, 2, 11);
  CHECK(t.denoised.cols() == 6);
  for (Eigen::Index m = 0; m < 6; ++m) {
    CHECK(t.targets.col(m).norm() == Approx(2.0));
    CHECK(t.probs.col(m).sum() == Approx(1.0));
  }
  CHECK((t.logits - (model.heads.logits * t.denoised).transpose()).norm() < 1e-12);
  const auto again = teacher_generate(model, X, 2, 11);
  CHECK((again.denoised - t.denoised).norm() == 0.0);
}

TEST_CASE("batch assembly is deterministic and within range") {
  const auto cfg = testing::tiny_config();
  const Model model = Model::init(cfg, 6);
  const auto X = testing::tiny_features(3);
  const auto a = assemble_batch(model, X, cfg, 5);
  const auto b = assemble_batch(model, X, cfg, 5);
  CHECK((a.noised - b.noised).norm() == 0.0);
  CHECK(a.timesteps == b.timesteps);
  for (int t : a.timesteps) {
    CHECK(t >= 1);
    CHECK(t <= cfg.steps);
  }
  const auto c = assemble_batch(model, X, cfg, 6);
  CHECK((a.noised - c.noised).norm() > 0.0);
}

TEST_CASE("student pass evaluates the denoiser once per item") {
  const auto cfg = testing::tiny_config();
  const Model model = Model::init(cfg, 6);
  const auto batch = assemble_batch(model, testing::tiny_features(4), cfg, 1);
  const auto s = student_forward(model, batch);
  CHECK(s.denoiser_evaluations == static_cast<std::size_t>(batch.size()));
  for (Eigen::Index m = 0; m < s.probs.rows(); ++m) CHECK(s.probs.row(m).sum() == Approx(1.0));
}

TEST_CASE("backprop gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto cfg = testing::tiny_config(seed);
    const Model model = Model::init(cfg, 6);
    const auto batch = assemble_batch(model, testing::tiny_features(seed + 10), cfg, seed);
    CHECK(testing::gradient_error(model, batch, cfg.loss()) < 1e-4);
    auto naive = cfg.loss();
    naive.naive_ce = true;
    CHECK(testing::gradient_error(model, batch, naive) < 1e-4);
  }
}

TEST_CASE("teacher side is a constant of the student loss") {
  const auto cfg = testing::tiny_config();
  const Model model = Model::init(cfg, 6);
  const auto X = testing::tiny_features(2);
  const auto batch = assemble_batch(model, X, cfg, 3);
  // Moving L after assembly changes the student logits only; the stored
  // teacher logits and probabilities do not move with it.
  HeadParams h = model.heads;
  h.logits *= 1.5;
  const auto r0 = backprop(model.denoiser, model.heads, batch, cfg.loss());
  const auto r1 = backprop(model.denoiser, h, batch, cfg.loss());
  CHECK(r0.diffusion == Approx(r1.diffusion));
  CHECK(r0.classification != Approx(r1.classification));
}

TEST_CASE("loss value agrees between backprop and batch_loss") {
  const auto cfg = testing::tiny_config();
  const Model model = Model::init(cfg, 6);
  const auto batch = assemble_batch(model, testing::tiny_features(8), cfg, 2);
  const auto r = backprop(model.denoiser, model.heads, batch, cfg.loss());
  CHECK(r.loss == Approx(batch_loss(model.denoiser, model.heads, batch, cfg.loss())));
  CHECK(r.grads.all_finite());
  CHECK(r.grads.same_shape(model.denoiser, model.heads));
}

TEST_CASE("training is reproducible and independent of the thread count") {
  MixtureSpec spec;
  spec.clusters = 3;
  spec.dim = 6;
  spec.per_cluster = 8;
  const auto data = generate_mixture(spec);
  auto cfg = testing::tiny_config(4);
  cfg.epochs = 2;
  cfg.batch_items = 10;

  ::setenv("CLUDI_THREADS", "1", 1);
  const auto a = train(data, cfg);
  ::setenv("CLUDI_THREADS", "3", 1);
  const auto b = train(data, cfg);
  ::unsetenv("CLUDI_THREADS");
  REQUIRE(a.history.size() == 2);
  CHECK(a.history[1].loss == b.history[1].loss);
  CHECK((a.model.heads.logits - b.model.heads.logits).norm() == 0.0);
  CHECK((a.model.denoiser.weights[0] - b.model.denoiser.weights[0]).norm() == 0.0);
  CHECK(std::isfinite(a.history[0].loss));
}

TEST_CASE("periodic evaluation and history csv") {
  MixtureSpec spec;
  spec.clusters = 3;
  spec.dim = 6;
  spec.per_cluster = 5;
  const auto data = generate_mixture(spec);
  auto cfg = testing::tiny_config(2);
  cfg.epochs = 3;
  TrainOptions opt;
  opt.eval_every = 2;
  opt.eval.chains = 2;
  opt.eval.steps = 5;
  int calls = 0;
  opt.on_epoch = [&](const EpochRecord&) { ++calls; };
  const auto r = train(data, cfg, opt);
  CHECK(calls == 3);
  CHECK_FALSE(r.history[0].nmi.has_value());
  CHECK(r.history[1].nmi.has_value());
  CHECK(r.history[2].acc.has_value());

  const auto p = std::filesystem::temp_directory_path() / "cludi_test_history.csv";
  write_history_csv(r.history, p);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,loss,nmi,acc,ari");
  std::filesystem::remove(p);
}
