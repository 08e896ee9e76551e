#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "cludi/config.hpp"
#include "cludi/heads.hpp"
#include "cludi/model.hpp"

namespace cludi {

struct Classification {
  ClusterProbs probs;       // average of cluster_probs over the chains
  int label = 0;            // argmax, lowest index on ties
  Eigen::MatrixXd samples;  // final z_0 of every chain, d×B
};

// Monte-Carlo classification of a single input. Chain b of item `item`
// draws from the stream derive_seed(config.seed, {item, b}).
Classification classify(const Model& model, const Eigen::VectorXd& x, const InferenceConfig& config,
                        std::uint64_t item = 0);

struct BatchClassification {
  std::vector<int> labels;
  Eigen::MatrixXd probs;       // N×K
  Eigen::MatrixXd embeddings;  // N×d, per-item mean of the sampled z_0
};

// Row i of X (N×n) is classified with item index i, so each row's result
// does not depend on the rest of the batch.
BatchClassification classify_batch(const Model& model, const Eigen::MatrixXd& X,
                                   const InferenceConfig& config);

// Per-item coordinate-wise mean of the sampled z_0 vectors, N×d.
Eigen::MatrixXd export_embeddings(const Model& model, const Eigen::MatrixXd& X,
                                  const InferenceConfig& config);

// CSV with header "label,p0,...,p{K-1}".
void write_predictions_csv(const BatchClassification& result, const std::filesystem::path& path);
// CSV with header "z0,...,z{d-1}".
void write_embeddings_csv(const Eigen::MatrixXd& embeddings, const std::filesystem::path& path);

}  // namespace cludi
