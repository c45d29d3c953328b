#pragma once

#include <optional>
#include <span>

#include "greg/autodiff.hpp"

namespace greg {

struct LossConfig {
  double lambda_s = 0.1;
  double lambda_grad = 1.0;
  double m_in = -25.0;
  double m_aux = -7.0;
  double grad_norm_eps = 1e-12;

  /// Throws InvalidArgument on negative weights, non-positive eps or
  /// m_in >= m_aux.
  void validate() const;
};

/// Mean over the batch of LSE(logits) - logits[label].
ad::Var cross_entropy(ad::Var logits, std::span<const int> labels);

/// Per-sample squared hinges of the margin loss, n x 1:
///   ID:  max(0, S - m_in)^2       aux: max(0, m_aux - S)^2
ad::Var id_margin_terms(ad::Var id_scores, const LossConfig& cfg);
ad::Var aux_margin_terms(ad::Var aux_scores, const LossConfig& cfg);

/// Batch mean of the ID hinge terms plus batch mean of the aux hinge terms.
/// A missing side contributes 0.
ad::Var energy_margin_loss(ad::Graph& graph, std::optional<ad::Var> id_scores,
                           std::optional<ad::Var> aux_scores, const LossConfig& cfg);

/// Gradient-penalty gates evaluated on detached scores (1 = open):
///   ID: S <= m_in      aux: S >= m_aux
Matrix id_gradient_gate(const Matrix& scores, const LossConfig& cfg);
Matrix aux_gradient_gate(const Matrix& scores, const LossConfig& cfg);

/// sqrt(sum_j g_ij^2 + eps) per row, n x 1.
ad::Var gradient_norms(ad::Var gradient, double eps);

/// One side of the gradient penalty: the input batch (a variable node) and
/// the scores computed from it on the same graph.
struct GradientSide {
  ad::Var inputs;
  ad::Var scores;
};

/// Per-sample gated norms for both sides, plus the loss built from them.
struct GradRegTerms {
  std::optional<ad::Var> id_terms;   // n_id x 1
  std::optional<ad::Var> aux_terms;  // n_aux x 1
  std::optional<ad::Var> id_norms;
  std::optional<ad::Var> aux_norms;
  ad::Var loss;
};

/// Mean over the ID batch of 1[S <= m_in] ||grad_x S|| plus mean over the aux
/// batch of 1[S >= m_aux] ||grad_x S||. The input gradients are recorded on the
/// graph, so the result is differentiable w.r.t. the model parameters.
/// Without `create_graph` the input gradients are detached and the loss is a
/// value only (used when the penalty weight is 0).
GradRegTerms grad_reg_terms(ad::Graph& graph, std::optional<GradientSide> id,
                            std::optional<GradientSide> aux, const LossConfig& cfg,
                            bool create_graph = true);

inline ad::Var grad_reg_loss(ad::Graph& graph, std::optional<GradientSide> id,
                             std::optional<GradientSide> aux, const LossConfig& cfg) {
  return grad_reg_terms(graph, id, aux, cfg).loss;
}

/// ce + lambda_s * l_s + lambda_grad * l_grad. Terms whose weight is 0 are
/// left out of the graph entirely.
ad::Var total_loss(ad::Var ce, ad::Var l_s, ad::Var l_grad, const LossConfig& cfg);

}  // namespace greg
