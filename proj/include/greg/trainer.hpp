#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "greg/data.hpp"
#include "greg/losses.hpp"
#include "greg/model.hpp"
#include "greg/sampler.hpp"

namespace greg {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t id_batch_size = 64;
  /// Auxiliary pool per step, as a multiple of the ID batch size.
  std::size_t aux_pool_multiple = 8;
  double lr_max = 0.01;
  double lr_min = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  /// GReg+ (energy-based cluster sampling) when true, GReg otherwise.
  bool sampler_enabled = false;
  /// Cluster count for the sampler; 0 means id_batch_size.
  std::size_t clusters = 0;
  KMeansOptions kmeans{20, 1};
  LossConfig loss;

  std::size_t cluster_count() const { return clusters == 0 ? id_batch_size : clusters; }
  void validate() const;
};

struct TrajectoryRecord {
  std::size_t iter = 0;
  double ce = 0.0;
  double l_s = 0.0;
  double l_grad = 0.0;
  double mean_grad_norm = 0.0;
  double lr = 0.0;
};

using TrajectoryLog = std::vector<TrajectoryRecord>;

/// lr_min + (lr_max - lr_min) (1 + cos(pi t / T)) / 2
double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min);

/// Momentum buffers, one per parameter, zero until the first step.
struct SgdState {
  std::vector<Matrix> velocity;
};

/// g = grad + wd w;  v = mu v + g;  w = w - lr v
void sgd_step(std::span<Tensor* const> params, std::span<const Matrix> grads, SgdState& state, double lr,
              double momentum, double weight_decay);

struct TrainResult {
  MlpModel model;
  TrajectoryLog log;
};

/// Runs epochs x ceil(|id| / n_ID) optimizer steps of
///   L = CE + lambda_s L_S + lambda_grad L_gradS
/// on shuffled ID batches plus auxiliary samples, drawn either by
/// energy-based cluster sampling (low-energy picks feed L_S, high-energy picks
/// feed L_gradS) or uniformly (2 n_ID draws, split evenly between the terms).
/// The ID shuffle and the auxiliary draws use separate seeded streams.
TrainResult train(MlpModel model, const LabeledSet& id, const Matrix& aux, const TrainConfig& cfg);

/// iter,ce,l_s,l_grad,mean_grad_norm,lr
void write_trajectory_csv(const TrajectoryLog& log, const std::filesystem::path& path);

}  // namespace greg
