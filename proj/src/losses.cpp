#include "cludi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cludi/error.hpp"

namespace cludi {

namespace {

const double kLogFloor = std::log(kProbabilityFloor);

void require_finite(const Eigen::MatrixXd& m, const char* component) {
  if (!m.allFinite()) throw NumericalFailure(component, "non-finite logits");
}

// log-softmax along each row of logits / temperature.
Eigen::MatrixXd row_log_softmax(const Eigen::MatrixXd& logits, double temperature) {
  Eigen::MatrixXd y = logits / temperature;
  for (Eigen::Index m = 0; m < y.rows(); ++m) {
    const double mx = y.row(m).maxCoeff();
    const double lse = mx + std::log((y.row(m).array() - mx).exp().sum());
    y.row(m).array() -= lse;
  }
  return y;
}

// log-softmax along each column of logits / temperature.
Eigen::MatrixXd col_log_softmax(const Eigen::MatrixXd& logits, double temperature) {
  Eigen::MatrixXd y = logits / temperature;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    const double mx = y.col(k).maxCoeff();
    const double lse = mx + std::log((y.col(k).array() - mx).exp().sum());
    y.col(k).array() -= lse;
  }
  return y;
}

// Row-normalize in the log domain: returns exp(a_mk - LSE_k a_m·).
Eigen::MatrixXd row_normalize_log(const Eigen::MatrixXd& log_a, const char* component) {
  Eigen::MatrixXd out(log_a.rows(), log_a.cols());
  for (Eigen::Index m = 0; m < log_a.rows(); ++m) {
    const double mx = log_a.row(m).maxCoeff();
    if (!std::isfinite(mx)) {
      throw NumericalFailure(component, "row of all-zero conditionals", m);
    }
    const double lse = mx + std::log((log_a.row(m).array() - mx).exp().sum());
    out.row(m) = (log_a.row(m).array() - lse).exp();
  }
  return out;
}

// log of (M/K)·p_mk / Σ_m' p_m'k, given log p (row log-probabilities).
Eigen::MatrixXd log_batch_prior(const Eigen::MatrixXd& log_p) {
  const double M = static_cast<double>(log_p.rows());
  const double K = static_cast<double>(log_p.cols());
  Eigen::MatrixXd out(log_p.rows(), log_p.cols());
  for (Eigen::Index k = 0; k < log_p.cols(); ++k) {
    const double mx = log_p.col(k).maxCoeff();
    if (!std::isfinite(mx)) {
      throw NumericalFailure("student_regularized_probs", "column sums to zero", -1);
    }
    const double lse = mx + std::log((log_p.col(k).array() - mx).exp().sum());
    out.col(k) = (log_p.col(k).array() - lse) + std::log(M / K);
  }
  return out;
}

Eigen::MatrixXd floor_log(const Eigen::MatrixXd& log_p) {
  return log_p.cwiseMax(kLogFloor);
}

void check_class_inputs(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student, double tau,
                        double tau_col) {
  if (teacher.rows() != student.rows() || teacher.cols() != student.cols()) {
    throw InvalidArgument("class_loss: teacher and student shapes differ");
  }
  if (teacher.rows() < 1 || teacher.cols() < 1) throw InvalidArgument("class_loss: empty batch");
  if (!(tau > 0.0) || !(tau_col > 0.0)) throw InvalidArgument("class_loss: bad temperature");
  require_finite(teacher, "class_loss");
  require_finite(student, "class_loss");
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
}

LossWeights make_loss_weights(const NoiseSchedule& schedule, std::span<const int> timesteps,
                              double gamma, SnrClip mode) {
  LossWeights w;
  w.values.reserve(timesteps.size());
  for (int t : timesteps) w.values.push_back(min_snr_weight(schedule, t, gamma, mode));
  return w;
}

double diffusion_loss(const Eigen::VectorXd& target, const Eigen::VectorXd& pred) {
  if (target.size() != pred.size()) throw InvalidArgument("diffusion_loss: dimension mismatch");
  return (target - pred).squaredNorm();
}

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits, double tau_col) {
  if (logits.rows() < 1) throw InvalidArgument("column_softmax: empty batch");
  if (!(tau_col > 0.0)) throw InvalidArgument("column_softmax: tau_col must be positive");
  require_finite(logits, "column_softmax");
  return col_log_softmax(logits, tau_col).array().exp();
}

Eigen::MatrixXd teacher_regularized_probs(const Eigen::MatrixXd& logits, double tau_col) {
  if (logits.rows() < 1) throw InvalidArgument("teacher_regularized_probs: empty batch");
  if (!(tau_col > 0.0)) throw InvalidArgument("teacher_regularized_probs: bad tau_col");
  require_finite(logits, "teacher_regularized_probs");
  return row_normalize_log(col_log_softmax(logits, tau_col), "teacher_regularized_probs");
}

Eigen::MatrixXd student_regularized_probs(const Eigen::MatrixXd& probs) {
  if (probs.rows() < 1) throw InvalidArgument("student_regularized_probs: empty batch");
  const double scale = static_cast<double>(probs.rows()) / static_cast<double>(probs.cols());
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  for (Eigen::Index k = 0; k < probs.cols(); ++k) {
    const double sum = probs.col(k).sum();
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      throw NumericalFailure("student_regularized_probs",
                             "column " + std::to_string(k) + " sums to zero");
    }
    out.col(k) = scale * probs.col(k) / sum;
  }
  return out;
}

ClassLossGradient class_loss_backward(const Eigen::MatrixXd& teacher_logits,
                                      const Eigen::MatrixXd& student_logits, double tau,
                                      double tau_col, const LossConfig& config,
                                      const Eigen::VectorXd& coefficients) {
  check_class_inputs(teacher_logits, student_logits, tau, tau_col);
  const Eigen::Index M = student_logits.rows();
  const Eigen::Index K = student_logits.cols();
  if (coefficients.size() != M) throw InvalidArgument("class_loss: coefficient count mismatch");

  ClassLossGradient out;
  out.per_item = Eigen::VectorXd::Zero(M);
  out.student_logits = Eigen::MatrixXd::Zero(M, K);

  const Eigen::MatrixXd log_p_student = row_log_softmax(student_logits, tau);
  const Eigen::MatrixXd log_p_teacher = row_log_softmax(teacher_logits, tau);
  const Eigen::MatrixXd p_student = log_p_student.array().exp();

  // ∂J/∂(row log-probs of the student), accumulated from both terms, then
  // pushed through the row log-softmax at the end.
  Eigen::MatrixXd g_log_p = Eigen::MatrixXd::Zero(M, K);
  // ∂J/∂(student_logits / τ_col) from the column-softmax path.
  Eigen::MatrixXd g_col = Eigen::MatrixXd::Zero(M, K);

  if (config.naive_ce) {
    const Eigen::MatrixXd q = log_p_teacher.array().exp();
    const Eigen::MatrixXd log_q = floor_log(log_p_teacher);
    for (Eigen::Index m = 0; m < M; ++m) {
      const double c = 0.5 * coefficients[m];
      double forward = 0.0;
      double backward = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) {
        const double lp = log_p_student(m, k);
        const bool clamped = lp < kLogFloor;
        forward -= q(m, k) * (clamped ? kLogFloor : lp);
        backward -= p_student(m, k) * log_q(m, k);
        if (!clamped) g_log_p(m, k) -= c * q(m, k);
        // ∂/∂ log p̂_mk of -Σ_k p̂_mk log q_mk is -p̂_mk log q_mk.
        g_log_p(m, k) -= c * p_student(m, k) * log_q(m, k);
      }
      out.per_item[m] = 0.5 * (forward + backward);
    }
  } else {
    // First term: teacher regularized by the column prior, student by the
    // batch prior.
    const Eigen::MatrixXd q =
        row_normalize_log(col_log_softmax(teacher_logits, tau_col), "teacher_regularized_probs");
    const Eigen::MatrixXd log_s = log_batch_prior(log_p_student);

    // Second (mirrored) term.
    const Eigen::MatrixXd log_c_student = col_log_softmax(student_logits, tau_col);
    const Eigen::MatrixXd s_prime = row_normalize_log(log_c_student, "teacher_regularized_probs");
    const Eigen::MatrixXd log_q_prime = floor_log(log_batch_prior(log_p_teacher));

    Eigen::MatrixXd g_log_s = Eigen::MatrixXd::Zero(M, K);
    Eigen::MatrixXd g_s_prime(M, K);
    for (Eigen::Index m = 0; m < M; ++m) {
      const double c = 0.5 * coefficients[m];
      double first = 0.0;
      double second = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) {
        const double ls = log_s(m, k);
        const bool clamped = ls < kLogFloor;
        first -= q(m, k) * (clamped ? kLogFloor : ls);
        second -= s_prime(m, k) * log_q_prime(m, k);
        if (!clamped) g_log_s(m, k) = -c * q(m, k);
        g_s_prime(m, k) = -c * log_q_prime(m, k);
      }
      out.per_item[m] = 0.5 * (first + second);
    }

    // log ŝ_mk = log(M/K) + log p̂_mk - LSE_m' log p̂_m'k
    for (Eigen::Index k = 0; k < K; ++k) {
      const double colsum = g_log_s.col(k).sum();
      const double mx = log_p_student.col(k).maxCoeff();
      const double lse = mx + std::log((log_p_student.col(k).array() - mx).exp().sum());
      for (Eigen::Index m = 0; m < M; ++m) {
        g_log_p(m, k) += g_log_s(m, k) - std::exp(log_p_student(m, k) - lse) * colsum;
      }
    }

    // ŝ' = row softmax of the column log-softmax of student_logits / τ_col.
    Eigen::MatrixXd g_log_c(M, K);
    for (Eigen::Index m = 0; m < M; ++m) {
      const double dot = s_prime.row(m).dot(g_s_prime.row(m));
      g_log_c.row(m) = s_prime.row(m).array() * (g_s_prime.row(m).array() - dot);
    }
    for (Eigen::Index k = 0; k < K; ++k) {
      const double colsum = g_log_c.col(k).sum();
      g_col.col(k) = g_log_c.col(k).array() - log_c_student.col(k).array().exp() * colsum;
    }
  }

  // Row log-softmax: ∂/∂y_mj = g_mj - p̂_mj Σ_k g_mk, with y = logits / τ.
  Eigen::MatrixXd grad(M, K);
  for (Eigen::Index m = 0; m < M; ++m) {
    const double rowsum = g_log_p.row(m).sum();
    grad.row(m) = g_log_p.row(m).array() - p_student.row(m).array() * rowsum;
  }
  out.student_logits = grad / tau + g_col / tau_col;

  if (!out.per_item.allFinite()) throw NumericalFailure("class_loss", "non-finite loss");
  return out;
}

Eigen::VectorXd class_loss(const Eigen::MatrixXd& teacher_logits,
                           const Eigen::MatrixXd& student_logits, double tau, double tau_col,
                           const LossConfig& config) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(student_logits.rows());
  return class_loss_backward(teacher_logits, student_logits, tau, tau_col, config, ones).per_item;
}

double total_loss(std::span<const double> dif_terms, std::span<const double> cls_terms,
                  const LossWeights& weights, const LossConfig& config) {
  if (dif_terms.size() != cls_terms.size() || dif_terms.size() != weights.values.size()) {
    throw InvalidArgument("total_loss: length mismatch");
  }
  if (dif_terms.empty()) throw InvalidArgument("total_loss: empty batch");
  double sum = 0.0;
  for (std::size_t m = 0; m < dif_terms.size(); ++m) {
    sum += weights.values[m] * (dif_terms[m] + config.lambda * cls_terms[m]);
  }
  const double loss = sum / static_cast<double>(dif_terms.size());
  if (!std::isfinite(loss)) throw NumericalFailure("total_loss", "non-finite loss");
  return loss;
}

}  // namespace cludi
