#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "greg/autodiff.hpp"
#include "greg/rng.hpp"
#include "greg/tensor.hpp"

namespace greg {

enum class ActivationKind { Relu, LeakyRelu };

struct Activation {
  ActivationKind kind = ActivationKind::Relu;
  double slope = 0.01;  // LeakyRelu only

  double negative_slope() const { return kind == ActivationKind::Relu ? 0.0 : slope; }
};

struct DenseLayer {
  Tensor weight;  // d_out x d_in
  Tensor bias;    // d_out
  Activation activation;
};

/// f(x) = W h(x) + b, where h is a stack of affine + piecewise-linear layers.
class MlpModel {
 public:
  MlpModel(std::vector<DenseLayer> hidden, Tensor head_weight, Tensor head_bias);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t feature_dim() const;
  std::size_t class_count() const { return head_weight_.shape()[0]; }

  const std::vector<DenseLayer>& hidden_layers() const { return hidden_; }
  const Tensor& head_weight() const { return head_weight_; }
  const Tensor& head_bias() const { return head_bias_; }

  /// Parameters in declaration order: W1, b1, ..., Wn, bn, W, b.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  friend bool operator==(const MlpModel& a, const MlpModel& b);

 private:
  std::vector<DenseLayer> hidden_;
  Tensor head_weight_;
  Tensor head_bias_;
  std::size_t input_dim_ = 0;
};

struct ModelSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t classes = 4;
  Activation activation;
};

/// Fan-in uniform bound sqrt(6 / fan_in).
double init_bound(std::size_t fan_in);

/// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)) drawn layer by layer in
/// row-major order, biases zero.
MlpModel init_model(const ModelSpec& spec, std::uint64_t seed);

/// Parameters of a model placed on a graph. Trainable bindings are variables
/// (gradients w.r.t. them are available); otherwise they are constants.
struct BoundModel {
  const MlpModel* model = nullptr;
  std::vector<ad::Var> params;
};

BoundModel bind(const MlpModel& model, ad::Graph& graph, bool trainable);

/// h(x) for a batch x (n x d).
ad::Var features(const BoundModel& bound, ad::Var x);
/// Logits W h(x) + b, n x K.
ad::Var forward(const BoundModel& bound, ad::Var x);

ad::Var features(const MlpModel& model, const Matrix& x, ad::Graph& graph);
ad::Var forward(const MlpModel& model, const Matrix& x, ad::Graph& graph);

/// Graph-free evaluation for inference paths.
Matrix predict_features(const MlpModel& model, const Matrix& x);
Matrix predict_logits(const MlpModel& model, const Matrix& x);

// ---------------------------------------------------------------------------
// Piecewise-linear structure

/// Sign pattern of every hidden pre-activation (true where >= 0).
using ActivationPattern = std::vector<bool>;

ActivationPattern activation_pattern(const MlpModel& model, const Vector& x);

/// Smallest |pre-activation| over all hidden units at x.
double boundary_margin(const MlpModel& model, const Vector& x);

/// The affine map f(x') = A x' + c valid on the region sharing `pattern`.
struct LocalAffine {
  Matrix A;  // K x d
  Vector c;  // K
};

LocalAffine local_affine(const MlpModel& model, const ActivationPattern& pattern);

/// Exact radius of the largest ball around x inside its activation region.
double inscribed_radius(const MlpModel& model, const Vector& x);

/// Radius r such that every probe drawn uniformly from B(x, r) has the
/// activation pattern of x. Found by halving from `initial_radius` until a
/// batch of probes agrees, then bisecting between the last failing and the
/// first passing radius, and finally clamped to inscribed_radius. Returns 0
/// if no radius above 2^-60 * initial works.
double probe_linear_region(const MlpModel& model, const Vector& x, Rng& rng,
                           double initial_radius = 1.0, std::size_t probes = 64);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const MlpModel& model, std::ostream& out);
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(std::istream& in);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace greg
