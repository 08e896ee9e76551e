#include "cludi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cludi/error.hpp"

namespace cludi {

namespace {

void check_pair(std::span<const int> pred, std::span<const int> truth, const char* what) {
  if (pred.size() != truth.size()) {
    throw InvalidArgument(std::string(what) + ": labelings have different lengths");
  }
  if (pred.empty()) throw InvalidArgument(std::string(what) + ": empty labeling");
  auto negative = [](int v) { return v < 0; };
  if (std::any_of(pred.begin(), pred.end(), negative) ||
      std::any_of(truth.begin(), truth.end(), negative)) {
    throw InvalidArgument(std::string(what) + ": labels must be non-negative");
  }
}

double entropy(const Eigen::VectorXd& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0.0) {
      const double p = counts[i] / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

Eigen::MatrixXd contingency(std::span<const int> pred, std::span<const int> truth) {
  check_pair(pred, truth, "contingency");
  const int rows = *std::max_element(pred.begin(), pred.end()) + 1;
  const int cols = *std::max_element(truth.begin(), truth.end()) + 1;
  if (rows > 10000 || cols > 10000) {
    throw InvalidArgument("contingency: label ids above 10^4 are not supported");
  }
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(rows, cols);
  for (std::size_t i = 0; i < pred.size(); ++i) table(pred[i], truth[i]) += 1.0;
  return table;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (n > m) throw InvalidArgument("solve_assignment: need rows <= columns");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<Eigen::Index> owner(m + 1, 0), way(m + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    owner[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = owner[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 1; j <= m; ++j) {
    if (owner[j] != 0) assignment[static_cast<std::size_t>(owner[j] - 1)] = static_cast<int>(j - 1);
  }
  return assignment;
}

double accuracy_hungarian(std::span<const int> pred, std::span<const int> truth) {
  Eigen::MatrixXd table = contingency(pred, truth);
  // Maximize matches = minimize negated counts; transpose so rows <= cols.
  if (table.rows() > table.cols()) table.transposeInPlace();
  const std::vector<int> match = solve_assignment(-table);
  double matched = 0.0;
  for (std::size_t r = 0; r < match.size(); ++r) matched += table(static_cast<Eigen::Index>(r), match[r]);
  return matched / static_cast<double>(pred.size());
}

double nmi(std::span<const int> pred, std::span<const int> truth, NmiNorm norm) {
  const Eigen::MatrixXd table = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  const Eigen::VectorXd row = table.rowwise().sum();
  const Eigen::VectorXd col = table.colwise().sum().transpose();
  const double h_pred = entropy(row, n);
  const double h_truth = entropy(col, n);
  if (h_pred == 0.0 || h_truth == 0.0) {
    // A trivial partition carries no information; both trivial means both
    // put every item in one cluster, which is the same partition.
    return (h_pred == 0.0 && h_truth == 0.0) ? 1.0 : 0.0;
  }
  double mi = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const double nij = table(i, j);
      if (nij > 0.0) mi += nij / n * std::log(n * nij / (row[i] * col[j]));
    }
  }
  const double denom =
      norm == NmiNorm::arithmetic ? 0.5 * (h_pred + h_truth) : std::sqrt(h_pred * h_truth);
  return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() < 2) throw InvalidArgument("ari: need at least two items");
  const Eigen::MatrixXd table = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  double sum_cells = 0.0;
  for (Eigen::Index i = 0; i < table.size(); ++i) sum_cells += choose2(table.data()[i]);
  double sum_rows = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) sum_rows += choose2(table.row(i).sum());
  double sum_cols = 0.0;
  for (Eigen::Index j = 0; j < table.cols(); ++j) sum_cols += choose2(table.col(j).sum());
  const double total = choose2(n);
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) {
    // Both partitions trivial in the same way (all singletons or one block).
    return 1.0;
  }
  return (sum_cells - expected) / (max_index - expected);
}

int count_clusters(std::span<const int> labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

}  // namespace cludi
