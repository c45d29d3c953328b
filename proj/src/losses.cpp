#include "greg/losses.hpp"

#include <string>
#include <vector>

namespace greg {

void LossConfig::validate() const {
  if (!(lambda_s >= 0.0)) throw InvalidArgument("lambda_s must be >= 0");
  if (!(lambda_grad >= 0.0)) throw InvalidArgument("lambda_grad must be >= 0");
  if (!(grad_norm_eps > 0.0)) throw InvalidArgument("grad_norm_eps must be > 0");
  if (!(m_in < m_aux)) {
    throw InvalidArgument("m_in (" + std::to_string(m_in) + ") must be below m_aux (" +
                          std::to_string(m_aux) + ")");
  }
}

ad::Var cross_entropy(ad::Var logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index k = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  if (n == 0) throw ShapeError("cross_entropy: empty batch");
  Matrix onehot = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(k) + ")");
    }
    onehot(i, label) = 1.0;
  }
  ad::Graph& g = logits.graph();
  const ad::Var picked = ad::sum_cols(logits * ad::constant(g, std::move(onehot)));
  return ad::mean(ad::logsumexp(logits) - picked);
}

namespace {

void require_finite_scores(ad::Var scores) {
  if (!scores.value().allFinite()) throw NumericError("loss: non-finite scores");
}

ad::Var squared(ad::Var a) { return a * a; }

}  // namespace

ad::Var id_margin_terms(ad::Var id_scores, const LossConfig& cfg) {
  require_finite_scores(id_scores);
  return squared(ad::relu(id_scores - cfg.m_in));
}

ad::Var aux_margin_terms(ad::Var aux_scores, const LossConfig& cfg) {
  require_finite_scores(aux_scores);
  return squared(ad::relu((-aux_scores) + cfg.m_aux));
}

ad::Var energy_margin_loss(ad::Graph& graph, std::optional<ad::Var> id_scores,
                           std::optional<ad::Var> aux_scores, const LossConfig& cfg) {
  std::optional<ad::Var> loss;
  auto add = [&](ad::Var term) { loss = loss ? *loss + term : term; };
  if (id_scores && id_scores->rows() > 0) add(ad::mean(id_margin_terms(*id_scores, cfg)));
  if (aux_scores && aux_scores->rows() > 0) add(ad::mean(aux_margin_terms(*aux_scores, cfg)));
  return loss ? *loss : ad::constant(graph, 0.0);
}

Matrix id_gradient_gate(const Matrix& scores, const LossConfig& cfg) {
  return (scores.array() <= cfg.m_in).cast<double>();
}

Matrix aux_gradient_gate(const Matrix& scores, const LossConfig& cfg) {
  return (scores.array() >= cfg.m_aux).cast<double>();
}

ad::Var gradient_norms(ad::Var gradient, double eps) {
  return ad::sqrt(ad::sum_cols(gradient * gradient) + eps);
}

GradRegTerms grad_reg_terms(ad::Graph& graph, std::optional<GradientSide> id,
                            std::optional<GradientSide> aux, const LossConfig& cfg,
                            bool create_graph) {
  if (id && id->inputs.rows() == 0) id.reset();
  if (aux && aux->inputs.rows() == 0) aux.reset();
  GradRegTerms out{{}, {}, {}, {}, ad::constant(graph, 0.0)};
  if (!id && !aux) return out;

  std::vector<ad::Var> inputs;
  std::optional<ad::Var> total;
  for (const auto* side : {&id, &aux}) {
    if (!*side) continue;
    require_finite_scores((*side)->scores);
    inputs.push_back((*side)->inputs);
    const ad::Var s = ad::sum((*side)->scores);
    total = total ? *total + s : s;
  }
  const std::vector<ad::Var> grads = ad::gradient(*total, inputs, create_graph);

  std::size_t slot = 0;
  std::optional<ad::Var> loss;
  if (id) {
    const ad::Var norms = gradient_norms(grads[slot++], cfg.grad_norm_eps);
    const ad::Var gate = ad::constant(graph, id_gradient_gate(id->scores.value(), cfg));
    out.id_norms = norms;
    out.id_terms = norms * gate;
    loss = ad::mean(*out.id_terms);
  }
  if (aux) {
    const ad::Var norms = gradient_norms(grads[slot++], cfg.grad_norm_eps);
    const ad::Var gate = ad::constant(graph, aux_gradient_gate(aux->scores.value(), cfg));
    out.aux_norms = norms;
    out.aux_terms = norms * gate;
    const ad::Var m = ad::mean(*out.aux_terms);
    loss = loss ? *loss + m : m;
  }
  out.loss = *loss;
  return out;
}

ad::Var total_loss(ad::Var ce, ad::Var l_s, ad::Var l_grad, const LossConfig& cfg) {
  ad::Var loss = ce;
  if (cfg.lambda_s != 0.0) loss = loss + cfg.lambda_s * l_s;
  if (cfg.lambda_grad != 0.0) loss = loss + cfg.lambda_grad * l_grad;
  return loss;
}

}  // namespace greg
