#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace cludi {

// Counts n_ij of items with predicted cluster i and true class j. Label ids
// are used directly as indices, so they should be compact.
Eigen::MatrixXd contingency(std::span<const int> pred, std::span<const int> truth);

// Minimum-cost assignment of rows to columns for an r×c cost matrix with
// r <= c (augmenting paths with potentials, O(r²c)). Returns the column
// assigned to every row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

// Fraction of items matched under the best one-to-one map from predicted
// clusters to true classes.
double accuracy_hungarian(std::span<const int> pred, std::span<const int> truth);

enum class NmiNorm { arithmetic, geometric };

// MI / mean(H_pred, H_truth). Both partitions trivial: 1 if identical else 0;
// exactly one trivial: 0.
double nmi(std::span<const int> pred, std::span<const int> truth,
           NmiNorm norm = NmiNorm::arithmetic);

// Adjusted Rand index from pair counts. Needs N >= 2.
double ari(std::span<const int> pred, std::span<const int> truth);

// Number of distinct ids in a labeling.
int count_clusters(std::span<const int> labels);

}  // namespace cludi
