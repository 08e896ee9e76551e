// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Long-running clustering checks share trained models.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cludi/data.hpp"
#include "cludi/diffusion.hpp"
#include "cludi/inference.hpp"
#include "cludi/losses.hpp"
#include "cludi/metrics.hpp"
#include "cludi/trainer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cludi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_exactness() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrainConfig cfg = testing::tiny_config(seed);  // batch 3 items × 2 views
    const Model model = Model::init(cfg, 6);
    const TrainingBatch batch =
        assemble_batch(model, testing::tiny_features(100 + seed), cfg, seed);
    worst = std::max(worst, testing::gradient_error(model, batch, cfg.loss()));
  }
  return {worst < 1e-4, fmt("max relative error %.3g over 5 seeds", worst)};
}

// ----------------------------------------------------------------- schedule

Outcome schedule_correctness() {
  const auto s = NoiseSchedule::sqrt_schedule(1000);
  bool ok = s.alpha_bar(0) == 1.0;
  const double err250 = std::abs(s.alpha_bar(250) - (1.0 - std::sqrt(0.2501)));
  ok = ok && err250 < 1e-12;
  bool monotone = true;
  int first_clamped = -1;
  for (int t = 1; t <= 1000; ++t) {
    monotone = monotone && s.alpha_bar(t) <= s.alpha_bar(t - 1);
    const double raw = 1.0 - std::sqrt(t / 1000.0 + 1e-4);
    if (raw < 1e-5 && first_clamped < 0) first_clamped = t;
  }
  // Clamp only at the tail: every t past the first clamped step is clamped,
  // and every step before it is unclamped.
  bool tail_only = first_clamped > 900;
  for (int t = 1; t <= 1000; ++t) {
    const double raw = 1.0 - std::sqrt(t / 1000.0 + 1e-4);
    const bool clamped = s.alpha_bar(t) != raw;
    tail_only = tail_only && (clamped == (t >= first_clamped));
  }
  ok = ok && monotone && tail_only;
  return {ok, fmt("|alpha_bar(250) error| %.3g", err250) + ", clamp from t=" +
                  std::to_string(first_clamped)};
}

// ------------------------------------------------------------ forward noise

Outcome forward_noise_moments() {
  const auto s = NoiseSchedule::sqrt_schedule(1000);
  const NoiseScale scale(25.0);
  const int draws = 10000;
  Eigen::VectorXd z0(4);
  z0 << 1.0, -2.0, 0.5, 3.0;
  double worst = 0.0;
  for (int t : {1, 500, 1000}) {
    RandomStream rng(derive_seed(77, {static_cast<std::uint64_t>(t)}));
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sq = Eigen::VectorXd::Zero(4);
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(draws);
    for (int i = 0; i < draws; ++i) {
      samples.push_back(forward_noise(z0, t, s, scale, rng));
      sum += samples.back();
    }
    const Eigen::VectorXd mean = sum / draws;
    for (const auto& x : samples) sq += (x - mean).cwiseAbs2();
    const Eigen::VectorXd var = sq / (draws - 1);
    const double a = s.alpha_bar(t);
    const double true_var = (1.0 - a) * 25.0;
    for (int i = 0; i < 4; ++i) {
      const double se_mean = std::sqrt(true_var / draws);
      const double se_var = true_var * std::sqrt(2.0 / (draws - 1));
      worst = std::max(worst, std::abs(mean[i] - std::sqrt(a) * z0[i]) / se_mean);
      worst = std::max(worst, std::abs(var[i] - true_var) / se_var);
    }
  }
  return {worst <= 4.0, fmt("largest deviation %.2f standard errors", worst)};
}

// ------------------------------------------------------------------ sampler

Outcome sampler_fixed_point() {
  const auto s = NoiseSchedule::sqrt_schedule(1000);
  const NoiseScale scale(25.0);
  Eigen::VectorXd c(5);
  c << 0.3, -1.7, 2.2, 0.0, 5.0;
  const DenoiseFn constant = [&](const Eigen::VectorXd&, const Eigen::VectorXd&, int) { return c; };
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  double worst = 0.0;
  for (int points : {25, 100}) {
    for (Sampling mode : {Sampling::stochastic, Sampling::deterministic}) {
      RandomStream rng(static_cast<std::uint64_t>(points));
      const auto z = reverse_sample(constant, x, 5, TimeGrid::equally_spaced(1000, points), s,
                                    scale, rng, mode);
      worst = std::max(worst, (z - c).cwiseAbs().maxCoeff());
    }
  }
  // Deterministic repeatability with a real (untrained) network.
  const Model model = Model::init(testing::tiny_config(3), 6);
  const DenoiseFn net = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& xx, int t) {
    return denoiser_forward(model.denoiser, z, xx, t);
  };
  const Eigen::VectorXd xin = testing::tiny_features(9, 6, 1).col(0);
  const auto grid = TimeGrid::equally_spaced(model.schedule.steps(), 25);
  RandomStream r1(5), r2(5);
  const auto a = reverse_sample(net, xin, 4, grid, model.schedule, model.scale, r1,
                                Sampling::deterministic);
  const auto b = reverse_sample(net, xin, 4, grid, model.schedule, model.scale, r2,
                                Sampling::deterministic);
  const bool repeat = (a.array() == b.array()).all();
  return {worst < 1e-10 && repeat,
          fmt("max deviation %.3g", worst) + (repeat ? ", repeat bit-exact" : ", repeat differs")};
}

// --------------------------------------------------------------------- loss

Outcome loss_oracle() {
  RandomStream rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int M = static_cast<int>(rng.integer(1, 5));
    const int K = static_cast<int>(rng.integer(1, 3));
    const double spread = rng.uniform(0.05, 1.0);
    Eigen::MatrixXd T(M, K), S(M, K);
    for (int i = 0; i < M * K; ++i) {
      T.data()[i] = spread * rng.normal();
      S.data()[i] = spread * rng.normal();
    }
    LossConfig cfg;
    cfg.naive_ce = trial % 2 == 1;
    const auto got = class_loss(T, S, 0.1, 0.05, cfg);
    const auto want = oracle::class_loss(T, S, 0.1, 0.05, cfg.naive_ce);
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
  }
  double uniform_err = 0.0;
  for (int M = 1; M <= 5; ++M) {
    for (int K = 1; K <= 3; ++K) {
      const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(M, K, 0.37);
      const auto l = class_loss(z, z, 0.1, 0.05, {});
      uniform_err = std::max(uniform_err, (l.array() - std::log(K)).abs().maxCoeff());
    }
  }
  return {worst < 1e-8 && uniform_err < 1e-9,
          fmt("max oracle gap %.3g", worst) + fmt(", uniform gap %.3g", uniform_err)};
}

// ------------------------------------------------------------------ metrics

// All set partitions of n items as restricted growth strings.
std::vector<std::vector<int>> partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int blocks) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      cur[static_cast<std::size_t>(i)] = b;
      rec(i + 1, std::max(blocks, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

double entropy_nmi(const std::vector<int>& p, const std::vector<int>& t) {
  const double n = static_cast<double>(p.size());
  std::map<int, double> cp, ct;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp[p[i]] += 1;
    ct[t[i]] += 1;
    joint[{p[i], t[i]}] += 1;
  }
  auto H = [n](const std::map<int, double>& c) {
    double h = 0;
    for (const auto& [k, v] : c) h -= v / n * std::log(v / n);
    return h;
  };
  const double hp = H(cp), ht = H(ct);
  if (cp.size() == 1 || ct.size() == 1) return (cp.size() == 1 && ct.size() == 1) ? 1.0 : 0.0;
  double mi = 0;
  for (const auto& [k, v] : joint) {
    mi += v / n * std::log(v * n / (cp[k.first] * ct[k.second]));
  }
  return mi / (0.5 * (hp + ht));
}

Outcome metric_oracles() {
  double acc_gap = 0, ari_gap = 0, nmi_gap = 0;
  long pairs = 0;
  auto check = [&](const std::vector<int>& p, const std::vector<int>& t) {
    acc_gap = std::max(acc_gap, std::abs(accuracy_hungarian(p, t) - oracle::brute_force_accuracy(p, t)));
    if (p.size() >= 2) ari_gap = std::max(ari_gap, std::abs(ari(p, t) - oracle::pair_counting_ari(p, t)));
    nmi_gap = std::max(nmi_gap, std::abs(nmi(p, t) - entropy_nmi(p, t)));
    ++pairs;
  };
  for (int n = 1; n <= 6; ++n) {
    const auto all = partitions(n);
    for (const auto& p : all)
      for (const auto& t : all) check(p, t);
  }
  // N = 7, 8: every partition against every truth with at most 3 blocks.
  for (int n = 7; n <= 8; ++n) {
    const auto all = partitions(n);
    std::vector<std::vector<int>> truths;
    for (const auto& t : all) {
      if (*std::max_element(t.begin(), t.end()) < 3) truths.push_back(t);
    }
    RandomStream rng(static_cast<std::uint64_t>(n));
    for (int k = 0; k < 12; ++k) {
      const auto& t = truths[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(truths.size()) - 1))];
      for (const auto& p : all) check(p, t);
    }
  }
  const std::vector<int> one(6, 0), split{0, 0, 1, 1, 2, 2};
  const bool degenerate = nmi(one, one) == 1.0 && nmi(one, split) == 0.0 && nmi(split, one) == 0.0;
  const bool ok = acc_gap < 1e-12 && ari_gap < 1e-12 && nmi_gap < 1e-12 && degenerate;
  return {ok, std::to_string(pairs) + " labeling pairs" + fmt(", acc gap %.2g", acc_gap) +
                  fmt(", ari gap %.2g", ari_gap) + fmt(", nmi gap %.2g", nmi_gap)};
}

// --------------------------------------------------------------- clustering

// Shared settings of the trained-model checks. Everything except hidden
// width, minibatch size and the epoch budget is at the library defaults.
constexpr int kEpochs = 10;
constexpr std::uint64_t kTrainSeed = 7;

FeatureDataset acceptance_mixture() {
  MixtureSpec spec;  // K=5, n=32, 200 per component, radius 8, noise 1, seed 7
  return generate_mixture(spec);
}

TrainConfig acceptance_config() {
  TrainConfig c;
  c.embed_dim = 32;
  c.clusters = 5;
  c.f2 = 25.0;
  c.lambda = 50.0;
  c.gamma = 5.0;
  c.views = 4;
  c.hidden = 128;
  c.batch_items = 100;
  c.epochs = kEpochs;
  c.seed = kTrainSeed;
  return c;
}

InferenceConfig eval_config(int chains) {
  InferenceConfig c;
  c.chains = chains;
  c.steps = 100;
  c.seed = 1;
  return c;
}

struct Scores {
  double acc = 0, nmi = 0, ari = 0, entropy = 0;
};

Scores score(const Model& model, const FeatureDataset& data, int chains) {
  const auto r = classify_batch(model, data.features, eval_config(chains));
  const auto& truth = *data.labels;
  Scores s;
  s.acc = accuracy_hungarian(r.labels, truth);
  s.nmi = cludi::nmi(r.labels, truth);
  s.ari = cludi::ari(r.labels, truth);
  std::vector<double> marginal(static_cast<std::size_t>(model.clusters()), 0.0);
  for (int l : r.labels) marginal[static_cast<std::size_t>(l)] += 1.0 / static_cast<double>(r.labels.size());
  for (double p : marginal) {
    if (p > 0) s.entropy -= p * std::log(p);
  }
  s.entropy = std::abs(s.entropy);  // a single occupied cluster gives -0
  return s;
}

std::string describe(const Scores& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "acc %.4f nmi %.4f ari %.4f entropy/lnK %.3f", s.acc, s.nmi,
                s.ari, s.entropy / std::log(5.0));
  return buf;
}

struct Trained {
  Model model;
  Scores scores;
};

Trained train_and_score(const FeatureDataset& data, const TrainConfig& cfg) {
  auto r = train(data, cfg);
  Scores s = score(r.model, data, 8);
  return {std::move(r.model), s};
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  report("gradient_exactness", gradient_exactness);
  report("schedule_correctness", schedule_correctness);
  report("forward_noise_moments", forward_noise_moments);
  report("sampler_fixed_point", sampler_fixed_point);
  report("loss_oracle", loss_oracle);
  report("metric_oracles", metric_oracles);

  const FeatureDataset data = acceptance_mixture();
  std::optional<Trained> regular;
  report("end_to_end_clustering", [&] {
    regular = train_and_score(data, acceptance_config());
    const auto& s = regular->scores;
    return Outcome{s.acc >= 0.95 && s.nmi >= 0.90 && s.ari >= 0.90,
                   describe(s) + ", " + std::to_string(kEpochs) + " epochs"};
  });

  report("anti_collapse", [&] {
    if (!regular) regular = train_and_score(data, acceptance_config());
    TrainConfig naive = acceptance_config();
    naive.naive_ce = true;
    const Trained collapsed = train_and_score(data, naive);
    const double lnK = std::log(5.0);
    const bool ok = regular->scores.entropy >= 0.8 * lnK && collapsed.scores.entropy < 0.2 * lnK;
    return Outcome{ok, fmt("regularized entropy/lnK %.3f", regular->scores.entropy / lnK) +
                           fmt(", naive entropy/lnK %.3f", collapsed.scores.entropy / lnK)};
  });

  report("corrupted_input_trend", [&] {
    if (!regular) regular = train_and_score(data, acceptance_config());
    const TrainConfig& cfg = regular->model.config;
    double margin = 0.0;
    std::string per_rep;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
      FeatureDataset noisy = data;
      RandomStream rng(derive_seed(31, {rep}));
      for (Eigen::Index i = 0; i < noisy.size(); ++i) {
        noisy.features.row(i) = augment_features(data.features.row(i).transpose(), cfg.drop_prob,
                                                 cfg.sigma2_low, cfg.sigma2_high, rng)
                                    .transpose();
      }
      const double a1 = score(regular->model, noisy, 1).acc;
      const double a16 = score(regular->model, noisy, 16).acc;
      margin += (a16 - a1) / 10.0;
      per_rep += fmt(" %+.3f", a16 - a1);
    }
    return Outcome{margin >= 0.0, fmt("mean ACC(B=16) - ACC(B=1) %+.4f;", margin) + per_rep};
  });

  report("f2_ablation", [&] {
    if (!regular) regular = train_and_score(data, acceptance_config());
    std::map<double, double> acc{{25.0, regular->scores.acc}};
    for (double f2 : {0.01, 1e4}) {
      TrainConfig cfg = acceptance_config();
      cfg.f2 = f2;
      acc[f2] = train_and_score(data, cfg).scores.acc;
    }
    const bool ok = acc[25.0] > acc[0.01] && acc[25.0] > acc[1e4];
    return Outcome{ok, fmt("acc F2=0.01 %.4f", acc[0.01]) + fmt(", F2=25 %.4f", acc[25.0]) +
                           fmt(", F2=1e4 %.4f", acc[1e4])};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
