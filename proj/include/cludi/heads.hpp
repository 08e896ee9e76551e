#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace cludi {

// Classification head (L, τ) and target-embedding head (E), plus the column
// temperature used by the regularized class loss.
struct HeadParams {
  Eigen::MatrixXd logits;  // L: K×d
  Eigen::MatrixXd embed;   // E: d×K
  double tau = 0.1;
  double tau_col = 0.05;

  Eigen::Index clusters() const noexcept { return logits.rows(); }
  Eigen::Index embed_dim() const noexcept { return logits.cols(); }

  // Throws InvalidArgument on bad temperatures or inconsistent shapes.
  void validate() const;
};

// Uniform fan-in initialization of L; E gets unit-norm columns.
HeadParams init_heads(Eigen::Index clusters, Eigen::Index embed_dim, double tau, double tau_col,
                      std::uint64_t seed);

// Probability vector over K clusters; entries non-negative, sum 1.
class ClusterProbs {
 public:
  ClusterProbs() = default;
  explicit ClusterProbs(Eigen::VectorXd p);

  const Eigen::VectorXd& values() const noexcept { return p_; }
  Eigen::Index size() const noexcept { return p_.size(); }
  double operator[](Eigen::Index k) const { return p_[k]; }

  // Lowest index wins ties.
  Eigen::Index argmax() const;

 private:
  Eigen::VectorXd p_;
};

// Numerically stable log-softmax of v / temperature.
Eigen::VectorXd log_softmax(const Eigen::VectorXd& v, double temperature = 1.0);

// softmax(L·z0 / τ).
ClusterProbs cluster_probs(const HeadParams& heads, const Eigen::VectorXd& z0);

// √d · E·u / ‖E·u‖. Throws DegenerateTarget when E·u = 0.
Eigen::VectorXd target_embedding(const HeadParams& heads, const Eigen::VectorXd& u);

// Z holds one embedding per column (d×M); returns the M×K matrix of L·z_m.
Eigen::MatrixXd logits_matrix(const HeadParams& heads, const Eigen::MatrixXd& Z);

}  // namespace cludi
