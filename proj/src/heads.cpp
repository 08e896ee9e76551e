#include "cludi/heads.hpp"

#include <cmath>

#include "cludi/error.hpp"
#include "cludi/rng.hpp"

namespace cludi {

void HeadParams::validate() const {
  if (!(tau > 0.0) || !(tau_col > 0.0)) throw InvalidArgument("head temperatures must be positive");
  if (embed.rows() != logits.cols() || embed.cols() != logits.rows()) {
    throw InvalidArgument("head shapes disagree: L is K×d, E must be d×K");
  }
  if (!logits.allFinite() || !embed.allFinite()) {
    throw NumericalFailure("heads", "non-finite head parameters");
  }
}

HeadParams init_heads(Eigen::Index clusters, Eigen::Index embed_dim, double tau, double tau_col,
                      std::uint64_t seed) {
  if (clusters < 1 || embed_dim < 1) throw InvalidArgument("init_heads: K and d must be positive");
  RandomStream rng(derive_seed(seed, {0x4845414453ull}));
  HeadParams h;
  h.tau = tau;
  h.tau_col = tau_col;
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  h.logits.resize(clusters, embed_dim);
  for (Eigen::Index i = 0; i < h.logits.size(); ++i) h.logits.data()[i] = rng.uniform(-bound, bound);
  h.embed.resize(embed_dim, clusters);
  for (Eigen::Index k = 0; k < clusters; ++k) {
    Eigen::VectorXd col = rng.normal_vector(embed_dim);
    h.embed.col(k) = col / col.norm();
  }
  h.validate();
  return h;
}

ClusterProbs::ClusterProbs(Eigen::VectorXd p) : p_(std::move(p)) {}

Eigen::Index ClusterProbs::argmax() const {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < p_.size(); ++k) {
    if (p_[k] > p_[best]) best = k;
  }
  return best;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& v, double temperature) {
  const Eigen::VectorXd s = v / temperature;
  const double m = s.maxCoeff();
  if (!std::isfinite(m)) throw NumericalFailure("softmax", "non-finite logits");
  const double lse = m + std::log((s.array() - m).exp().sum());
  return s.array() - lse;
}

ClusterProbs cluster_probs(const HeadParams& heads, const Eigen::VectorXd& z0) {
  if (z0.size() != heads.embed_dim()) throw InvalidArgument("cluster_probs: dimension mismatch");
  const Eigen::VectorXd logits = heads.logits * z0;
  if (!logits.allFinite()) throw NumericalFailure("cluster_probs", "non-finite logits");
  return ClusterProbs(log_softmax(logits, heads.tau).array().exp());
}

Eigen::VectorXd target_embedding(const HeadParams& heads, const Eigen::VectorXd& u) {
  if (u.size() != heads.clusters()) throw InvalidArgument("target_embedding: dimension mismatch");
  const Eigen::VectorXd v = heads.embed * u;
  const double norm = v.norm();
  if (!(norm > 0.0)) throw DegenerateTarget("target_embedding: E·u is the zero vector");
  return std::sqrt(static_cast<double>(v.size())) * v / norm;
}

Eigen::MatrixXd logits_matrix(const HeadParams& heads, const Eigen::MatrixXd& Z) {
  if (Z.rows() != heads.embed_dim()) throw InvalidArgument("logits_matrix: shape mismatch");
  return (heads.logits * Z).transpose();
}

}  // namespace cludi
