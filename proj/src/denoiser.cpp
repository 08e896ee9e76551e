#include "cludi/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cludi/error.hpp"
#include "cludi/rng.hpp"

namespace cludi {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

std::vector<std::pair<int, int>> layer_dims(const DenoiserShape& s) {
  std::vector<std::pair<int, int>> dims;  // (out, in)
  dims.emplace_back(s.hidden, s.input_dim());
  for (int l = 1; l < s.hidden_layers; ++l) dims.emplace_back(s.hidden, s.hidden);
  dims.emplace_back(s.embed_dim, s.hidden);
  return dims;
}

Eigen::MatrixXd assemble_input(const DenoiserParams& p, const Eigen::MatrixXd& Z,
                               const Eigen::MatrixXd& X, std::span<const int> t) {
  const auto& s = p.shape;
  if (Z.rows() != s.embed_dim || X.rows() != s.feature_dim || Z.cols() != X.cols() ||
      static_cast<Eigen::Index>(t.size()) != Z.cols()) {
    throw InvalidArgument("denoiser_forward: input dimensions do not match parameters");
  }
  const Eigen::Index M = Z.cols();
  Eigen::MatrixXd in(s.input_dim(), M);
  in.topRows(s.embed_dim) = Z;
  in.middleRows(s.embed_dim, s.feature_dim) = X;
  // Consecutive columns often share a timestep; reuse the embedding.
  int last_t = -1;
  Eigen::VectorXd emb;
  for (Eigen::Index c = 0; c < M; ++c) {
    const int tc = t[static_cast<std::size_t>(c)];
    if (tc != last_t) {
      emb = time_embedding(tc, s.time_dim, s.steps);
      last_t = tc;
    }
    in.col(c).tail(s.time_dim) = emb;
  }
  return in;
}

}  // namespace

void DenoiserShape::validate() const {
  if (embed_dim < 1 || feature_dim < 1 || hidden < 1 || hidden_layers < 1 || steps < 1) {
    throw InvalidArgument("denoiser shape: all sizes must be positive");
  }
  if (time_dim < 2 || time_dim % 2 != 0) {
    throw InvalidArgument("denoiser shape: time embedding width must be even and >= 2");
  }
}

void DenoiserParams::validate() const {
  shape.validate();
  const auto dims = layer_dims(shape);
  if (weights.size() != dims.size() || biases.size() != dims.size()) {
    throw InvalidArgument("denoiser params: wrong layer count");
  }
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (weights[l].rows() != dims[l].first || weights[l].cols() != dims[l].second ||
        biases[l].size() != dims[l].first) {
      throw InvalidArgument("denoiser params: layer " + std::to_string(l) + " has wrong shape");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw NumericalFailure("denoiser", "non-finite parameters in layer " + std::to_string(l));
    }
  }
}

DenoiserParams zero_denoiser(const DenoiserShape& shape) {
  shape.validate();
  DenoiserParams p;
  p.shape = shape;
  for (auto [out, in] : layer_dims(shape)) {
    p.weights.push_back(Eigen::MatrixXd::Zero(out, in));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

DenoiserParams init_denoiser(const DenoiserShape& shape, std::uint64_t seed) {
  DenoiserParams p = zero_denoiser(shape);
  RandomStream rng(derive_seed(seed, {0x44454E4F49534552ull}));
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.weights[l].cols()));
    for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
      p.weights[l].data()[i] = rng.uniform(-bound, bound);
    }
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) p.biases[l][i] = rng.uniform(-bound, bound);
  }
  return p;
}

Eigen::VectorXd time_embedding(int t, int width, int steps) {
  if (width < 2 || width % 2 != 0) throw InvalidArgument("time_embedding: width must be even");
  if (t < 0 || t > steps) throw DomainError("time_embedding: timestep outside [0, T]");
  const int half = width / 2;
  Eigen::VectorXd e(width);
  for (int j = 0; j < half; ++j) {
    const double freq = std::pow(10000.0, -static_cast<double>(j) / half);
    e[j] = std::sin(t * freq);
    e[half + j] = std::cos(t * freq);
  }
  return e;
}

ForwardCache denoiser_forward_cached(const DenoiserParams& params, const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& X, std::span<const int> t) {
  ForwardCache cache;
  Eigen::MatrixXd a = assemble_input(params, Z, X, t);
  const std::size_t L = params.layers();
  cache.inputs.reserve(L);
  cache.preactivation.reserve(L - 1);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    Eigen::MatrixXd pre = params.weights[l] * a;
    pre.colwise() += params.biases[l];
    cache.inputs.push_back(std::move(a));
    a = pre.unaryExpr(&gelu);
    cache.preactivation.push_back(std::move(pre));
  }
  cache.output = params.weights[L - 1] * a;
  cache.output.colwise() += params.biases[L - 1];
  cache.inputs.push_back(std::move(a));
  return cache;
}

Eigen::MatrixXd denoiser_forward(const DenoiserParams& params, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& X, std::span<const int> t) {
  Eigen::MatrixXd a = assemble_input(params, Z, X, t);
  const std::size_t L = params.layers();
  for (std::size_t l = 0; l + 1 < L; ++l) {
    Eigen::MatrixXd pre = params.weights[l] * a;
    pre.colwise() += params.biases[l];
    a = pre.unaryExpr(&gelu);
  }
  Eigen::MatrixXd out = params.weights[L - 1] * a;
  out.colwise() += params.biases[L - 1];
  return out;
}

Eigen::MatrixXd denoiser_forward(const DenoiserParams& params, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& X, int t) {
  const std::vector<int> ts(static_cast<std::size_t>(Z.cols()), t);
  return denoiser_forward(params, Z, X, ts);
}

Eigen::VectorXd denoiser_forward(const DenoiserParams& params, const Eigen::VectorXd& z_t,
                                 const Eigen::VectorXd& x, int t) {
  const int ts[1] = {t};
  return denoiser_forward(params, Eigen::MatrixXd(z_t), Eigen::MatrixXd(x), ts).col(0);
}

DenoiserGradient denoiser_backward(const DenoiserParams& params, const ForwardCache& cache,
                                   const Eigen::MatrixXd& grad_output) {
  const std::size_t L = params.layers();
  if (cache.inputs.size() != L || grad_output.rows() != params.shape.embed_dim ||
      grad_output.cols() != cache.output.cols()) {
    throw InvalidArgument("denoiser_backward: cache does not match parameters");
  }
  DenoiserGradient g;
  g.weights.resize(L);
  g.biases.resize(L);
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t l = L; l-- > 0;) {
    g.weights[l] = delta * cache.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    delta = (params.weights[l].transpose() * delta).cwiseProduct(
        cache.preactivation[l - 1].unaryExpr(&gelu_grad));
  }
  return g;
}

}  // namespace cludi
