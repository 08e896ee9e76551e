#include "cludi/inference.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include "cludi/error.hpp"
#include "cludi/parallel.hpp"

namespace cludi {

namespace {

constexpr Eigen::Index kItemBlock = 32;

struct ChainResult {
  Eigen::MatrixXd samples;  // d × (items·B), column = item·B + b
  Eigen::MatrixXd probs;    // K × (items·B)
};

// Runs B chains for each column of X; `first_item` is the global index of
// column 0, used for stream derivation.
ChainResult run_chains(const Model& model, const Eigen::MatrixXd& X, const InferenceConfig& config,
                       std::uint64_t first_item) {
  const Eigen::Index items = X.cols();
  const Eigen::Index B = config.chains;
  Eigen::MatrixXd repeated(X.rows(), items * B);
  std::vector<RandomStream> streams;
  streams.reserve(static_cast<std::size_t>(items * B));
  for (Eigen::Index i = 0; i < items; ++i) {
    for (Eigen::Index b = 0; b < B; ++b) {
      repeated.col(i * B + b) = X.col(i);
      streams.emplace_back(derive_seed(config.seed, {first_item + static_cast<std::uint64_t>(i),
                                                     static_cast<std::uint64_t>(b)}));
    }
  }
  const TimeGrid grid = TimeGrid::equally_spaced(model.schedule.steps(), config.steps);
  const BatchDenoiseFn denoise = [&model](const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Xc,
                                          int t) { return denoiser_forward(model.denoiser, Z, Xc, t); };
  ChainResult r;
  r.samples = reverse_sample_batch(denoise, repeated, model.embed_dim(), grid, model.schedule,
                                   model.scale, streams);
  r.probs.resize(model.clusters(), r.samples.cols());
  for (Eigen::Index c = 0; c < r.samples.cols(); ++c) {
    r.probs.col(c) = cluster_probs(model.heads, r.samples.col(c)).values();
  }
  return r;
}

void check_inputs(const Model& model, Eigen::Index width, const InferenceConfig& config) {
  config.validate(model.schedule.steps());
  if (width != model.feature_dim()) {
    throw InvalidArgument("inference: feature width " + std::to_string(width) +
                          " does not match the model (" + std::to_string(model.feature_dim()) + ")");
  }
}

}  // namespace

Classification classify(const Model& model, const Eigen::VectorXd& x, const InferenceConfig& config,
                        std::uint64_t item) {
  check_inputs(model, x.size(), config);
  const ChainResult r = run_chains(model, Eigen::MatrixXd(x), config, item);
  Classification out;
  out.probs = ClusterProbs(r.probs.rowwise().mean());
  out.label = static_cast<int>(out.probs.argmax());
  out.samples = r.samples;
  return out;
}

BatchClassification classify_batch(const Model& model, const Eigen::MatrixXd& X,
                                   const InferenceConfig& config) {
  check_inputs(model, X.cols(), config);
  if (X.rows() < 1) throw InvalidArgument("classify_batch: empty dataset");
  const Eigen::Index N = X.rows();
  const Eigen::Index B = config.chains;
  const Eigen::MatrixXd Xt = X.transpose();

  BatchClassification out;
  out.labels.assign(static_cast<std::size_t>(N), 0);
  out.probs.resize(N, model.clusters());
  out.embeddings.resize(N, model.embed_dim());

  const auto blocks = static_cast<std::size_t>((N + kItemBlock - 1) / kItemBlock);
  parallel_for(blocks, [&](std::size_t first, std::size_t last) {
    for (std::size_t blk = first; blk < last; ++blk) {
      const Eigen::Index begin = static_cast<Eigen::Index>(blk) * kItemBlock;
      const Eigen::Index count = std::min(kItemBlock, N - begin);
      const ChainResult r =
          run_chains(model, Xt.middleCols(begin, count), config, static_cast<std::uint64_t>(begin));
      for (Eigen::Index i = 0; i < count; ++i) {
        const ClusterProbs p(r.probs.middleCols(i * B, B).rowwise().mean());
        out.probs.row(begin + i) = p.values().transpose();
        out.labels[static_cast<std::size_t>(begin + i)] = static_cast<int>(p.argmax());
        out.embeddings.row(begin + i) = r.samples.middleCols(i * B, B).rowwise().mean().transpose();
      }
    }
  });
  return out;
}

Eigen::MatrixXd export_embeddings(const Model& model, const Eigen::MatrixXd& X,
                                  const InferenceConfig& config) {
  return classify_batch(model, X, config).embeddings;
}

void write_predictions_csv(const BatchClassification& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17) << "label";
  for (Eigen::Index k = 0; k < result.probs.cols(); ++k) out << ",p" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < result.probs.rows(); ++i) {
    out << result.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < result.probs.cols(); ++k) out << ',' << result.probs(i, k);
    out << '\n';
  }
}

void write_embeddings_csv(const Eigen::MatrixXd& embeddings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < embeddings.cols(); ++j) out << (j ? "," : "") << 'z' << j;
  out << '\n';
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) {
      out << (j ? "," : "") << embeddings(i, j);
    }
    out << '\n';
  }
}

}  // namespace cludi
