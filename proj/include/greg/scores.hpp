#pragma once

#include <cmath>
#include <string_view>

#include "greg/autodiff.hpp"
#include "greg/model.hpp"

namespace greg {

/// OOD score functions. Every score follows one convention: a sample is
/// labeled ID when S(x) <= gamma, so lower means more ID-like.
enum class ScoreKind { Energy, Msp };

std::string_view score_name(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view name);

namespace detail {
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& logits) {
  if (!logits.allFinite()) throw NumericError("score: non-finite logits");
  if (logits.cols() < 1) throw ShapeError("score: logits need at least one column");
}
}  // namespace detail

/// Row-wise log-sum-exp in the shifted form max + log sum exp(x - max).
template <typename Derived>
VectorX<typename Derived::Scalar> logsumexp_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    out(r) = m + std::log((logits.row(r).array() - m).exp().sum());
  }
  return out;
}

/// S_En = -LSE(f(x)) per row.
template <typename Derived>
VectorX<typename Derived::Scalar> energy_score(const Eigen::MatrixBase<Derived>& logits) {
  detail::require_finite(logits);
  return -logsumexp_rows(logits);
}

/// Negated maximum softmax probability per row.
template <typename Derived>
VectorX<typename Derived::Scalar> msp_score(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(logits);
  VectorX<Scalar> out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    // max softmax = exp(m - LSE) = 1 / sum exp(x - m)
    out(r) = -Scalar(1) / (logits.row(r).array() - m).exp().sum();
  }
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> score(ScoreKind kind, const Eigen::MatrixBase<Derived>& logits) {
  return kind == ScoreKind::Energy ? energy_score(logits) : msp_score(logits);
}

/// Scores of a batch through the model.
Vector score_inputs(const MlpModel& model, const Matrix& x, ScoreKind kind);

/// Score as a graph node, n x 1.
ad::Var score_node(ScoreKind kind, ad::Var logits);

/// Scores and their input gradients for a batch held in `x` (a variable
/// node). Rows are independent, so the gradient of the summed score w.r.t. x
/// holds the per-sample gradients.
struct ScoredBatch {
  ad::Var scores;    // n x 1
  ad::Var gradient;  // n x d
};

ScoredBatch score_with_input_gradient(const BoundModel& bound, ad::Var x, ScoreKind kind,
                                      bool create_graph);

/// Detached per-sample input gradients, n x d.
Matrix score_input_gradient(const MlpModel& model, const Matrix& x, ScoreKind kind);

/// Per-sample L2 norms of the input gradient.
Vector score_gradient_norms(const MlpModel& model, const Matrix& x, ScoreKind kind);

}  // namespace greg
