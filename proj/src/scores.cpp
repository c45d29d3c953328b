#include "greg/scores.hpp"

#include <string>

namespace greg {

std::string_view score_name(ScoreKind kind) { return kind == ScoreKind::Energy ? "energy" : "msp"; }

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "energy") return ScoreKind::Energy;
  if (name == "msp") return ScoreKind::Msp;
  throw InvalidArgument("unknown score kind '" + std::string(name) + "'");
}

Vector score_inputs(const MlpModel& model, const Matrix& x, ScoreKind kind) {
  return score(kind, predict_logits(model, x));
}

ad::Var score_node(ScoreKind kind, ad::Var logits) {
  if (!logits.value().allFinite()) throw NumericError("score: non-finite logits");
  const ad::Var lse = ad::logsumexp(logits);
  if (kind == ScoreKind::Energy) return -lse;
  const ad::Var softmax = ad::exp(logits - ad::broadcast_cols(lse, logits.cols()));
  return -ad::max(softmax);
}

ScoredBatch score_with_input_gradient(const BoundModel& bound, ad::Var x, ScoreKind kind,
                                      bool create_graph) {
  const ad::Var scores = score_node(kind, forward(bound, x));
  const ad::Var grad = ad::gradient(ad::sum(scores), x, create_graph);
  return {scores, grad};
}

Matrix score_input_gradient(const MlpModel& model, const Matrix& x, ScoreKind kind) {
  ad::Graph graph;
  const BoundModel bound = bind(model, graph, false);
  const ad::Var input = ad::variable(graph, x);
  return score_with_input_gradient(bound, input, kind, false).gradient.value();
}

Vector score_gradient_norms(const MlpModel& model, const Matrix& x, ScoreKind kind) {
  return score_input_gradient(model, x, kind).rowwise().norm();
}

}  // namespace greg
