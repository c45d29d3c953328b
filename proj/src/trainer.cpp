#include "greg/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "greg/rng.hpp"
#include "greg/scores.hpp"

namespace greg {

void TrainConfig::validate() const {
  if (id_batch_size < 1) throw InvalidArgument("id_batch_size must be >= 1");
  if (!(lr_min <= lr_max)) throw InvalidArgument("lr_min must not exceed lr_max");
  if (!(lr_min >= 0.0)) throw InvalidArgument("lr_min must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (aux_pool_multiple < 1) throw InvalidArgument("aux_pool_multiple must be >= 1");
  loss.validate();
}

double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min) {
  if (total == 0) throw InvalidArgument("cosine_lr: total steps must be positive");
  if (t > total) throw InvalidArgument("cosine_lr: step beyond schedule");
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  // Clamped: the endpoints can round one ulp outside the range.
  return std::clamp(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase)), lr_min, lr_max);
}

void sgd_step(std::span<Tensor* const> params, std::span<const Matrix> grads, SgdState& state, double lr,
              double momentum, double weight_decay) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  if (state.velocity.empty()) {
    for (const Tensor* p : params) state.velocity.push_back(Matrix::Zero(p->matrix().rows(), p->matrix().cols()));
  }
  if (state.velocity.size() != params.size()) throw ShapeError("sgd_step: optimizer state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = params[i]->matrix();
    if (grads[i].rows() != w.rows() || grads[i].cols() != w.cols()) {
      throw ShapeError("sgd_step: gradient " + std::to_string(i) + " does not match its parameter");
    }
    Matrix& v = state.velocity[i];
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double g = grads[i].data()[j] + weight_decay * w.data()[j];
      v.data()[j] = momentum * v.data()[j] + g;
      w.data()[j] -= lr * v.data()[j];
    }
  }
}

namespace {

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

/// `count` distinct indices from [0, n), partial Fisher-Yates.
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

struct AuxBatches {
  Matrix margin;    // feeds L_S
  Matrix gradient;  // feeds L_gradS
};

AuxBatches draw_aux(const MlpModel& model, const Matrix& aux, const TrainConfig& cfg, Rng& rng,
                    std::uint64_t step_seed) {
  const std::size_t n = static_cast<std::size_t>(aux.rows());
  if (cfg.sampler_enabled) {
    const std::size_t pool_size = std::min(n, cfg.aux_pool_multiple * cfg.id_batch_size);
    const auto pool_rows = draw_without_replacement(n, pool_size, rng);
    const Matrix pool = gather_rows(aux, pool_rows);
    const SampledBatch picked = sample_batch(model, pool, cfg.cluster_count(), step_seed, cfg.kmeans);
    return {gather_rows(pool, picked.low_energy_ids), gather_rows(pool, picked.high_energy_ids)};
  }
  const auto rows = draw_without_replacement(n, 2 * cfg.id_batch_size, rng);
  const std::size_t half = rows.size() / 2;
  return {gather_rows(aux, std::span(rows).first(half)), gather_rows(aux, std::span(rows).subspan(half))};
}

}  // namespace

TrainResult train(MlpModel model, const LabeledSet& id, const Matrix& aux, const TrainConfig& cfg) {
  cfg.validate();
  if (id.size() == 0) throw InvalidArgument("train: empty ID dataset");
  if (id.labels.size() != id.size()) throw InvalidArgument("train: ID dataset must be labeled");
  if (aux.rows() == 0) throw InvalidArgument("train: empty auxiliary dataset");
  if (cfg.sampler_enabled && static_cast<std::size_t>(aux.rows()) < cfg.cluster_count()) {
    throw InvalidArgument("train: auxiliary set smaller than the cluster count");
  }
  if (id.inputs.cols() != aux.cols()) throw ShapeError("train: ID and auxiliary widths differ");

  const std::size_t n = id.size();
  const std::size_t steps_per_epoch = (n + cfg.id_batch_size - 1) / cfg.id_batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;

  Rng shuffle_rng(Rng::derive(cfg.seed, 0));
  Rng aux_rng(Rng::derive(cfg.seed, 1));
  SgdState state;
  TrainResult result{std::move(model), {}};
  MlpModel& m = result.model;
  const bool penalize = cfg.loss.lambda_grad != 0.0;

  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  ad::Graph graph;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const std::size_t begin = b * cfg.id_batch_size;
      const auto rows = std::span(order).subspan(begin, std::min(cfg.id_batch_size, n - begin));
      std::vector<int> labels;
      for (std::size_t r : rows) labels.push_back(id.labels[r]);
      const AuxBatches aux_batch = draw_aux(m, aux, cfg, aux_rng, Rng::derive(cfg.seed, 1000 + step));
      const double lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);

      const double nan = std::numeric_limits<double>::quiet_NaN();
      TrajectoryRecord rec{step, nan, nan, nan, nan, lr};
      std::vector<Matrix> grads;
      try {
        graph.clear();
        const BoundModel bound = bind(m, graph, true);
        const ad::Var x_id = ad::variable(graph, gather_rows(id.inputs, rows));
        const ad::Var logits = forward(bound, x_id);
        const ad::Var s_id = score_node(ScoreKind::Energy, logits);
        const ad::Var ce = cross_entropy(logits, labels);
        rec.ce = ce.scalar();

        std::optional<ad::Var> s_margin;
        if (aux_batch.margin.rows() > 0) {
          s_margin = score_node(ScoreKind::Energy, forward(bound, ad::constant(graph, aux_batch.margin)));
        }
        const ad::Var l_s = energy_margin_loss(graph, s_id, s_margin, cfg.loss);
        rec.l_s = l_s.scalar();

        std::optional<GradientSide> grad_aux;
        if (aux_batch.gradient.rows() > 0) {
          const ad::Var x_g = ad::variable(graph, aux_batch.gradient);
          grad_aux = GradientSide{x_g, score_node(ScoreKind::Energy, forward(bound, x_g))};
        }
        const GradRegTerms reg = grad_reg_terms(graph, GradientSide{x_id, s_id}, grad_aux, cfg.loss, penalize);
        const ad::Var loss = total_loss(ce, l_s, reg.loss, cfg.loss);

        rec.l_grad = reg.loss.scalar();
        double norm_sum = reg.id_norms->value().sum();
        Eigen::Index norm_count = reg.id_norms->rows();
        if (reg.aux_norms) {
          norm_sum += reg.aux_norms->value().sum();
          norm_count += reg.aux_norms->rows();
        }
        rec.mean_grad_norm = norm_sum / static_cast<double>(norm_count);
        if (!std::isfinite(loss.scalar())) throw NumericError("total loss is not finite");

        std::vector<ad::NodeId> wrt;
        for (const ad::Var& p : bound.params) wrt.push_back(p.id());
        grads = graph.gradient_values(loss.id(), wrt);
      } catch (const NumericError& e) {
        std::ostringstream os;
        os << "training diverged at iteration " << step << " (ce=" << rec.ce << ", l_s=" << rec.l_s
           << ", l_grad=" << rec.l_grad << "): " << e.what();
        throw NumericError(os.str());
      }

      const auto params = m.parameters();
      sgd_step(params, grads, state, lr, cfg.momentum, cfg.weight_decay);
      result.log.push_back(rec);
    }
  }
  return result;
}

void write_trajectory_csv(const TrajectoryLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  auto fmt = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  out << "iter,ce,l_s,l_grad,mean_grad_norm,lr\n";
  for (const auto& r : log) {
    out << r.iter << "," << fmt(r.ce) << "," << fmt(r.l_s) << "," << fmt(r.l_grad) << ","
        << fmt(r.mean_grad_norm) << "," << fmt(r.lr) << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace greg
