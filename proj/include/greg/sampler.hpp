#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "greg/model.hpp"
#include "greg/tensor.hpp"

namespace greg {

/// z / ||z||_2 per row; all-zero rows are returned unchanged.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = z;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar n = out.row(r).norm();
    if (n > Scalar(0)) out.row(r) /= n;
  }
  return out;
}

struct ClusterAssignment {
  Matrix centroids;             // k x d
  std::vector<int> labels;      // one per point, in [0, k)
  double objective = 0.0;       // sum of squared distances to assigned centroids
  std::vector<double> history;  // objective after every assignment step
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  std::size_t restarts = 1;
};

/// Lloyd's algorithm with k-means++ seeding. Each restart r draws from the
/// stream Rng::derive(seed, r); the lowest-objective restart wins (earliest on
/// ties). Empty clusters are reseeded at the point farthest from its centroid.
ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options = {});

/// Sum of squared distances from each point to its labeled centroid.
double kmeans_objective(const Matrix& points, const Matrix& centroids, std::span<const int> labels);

struct SampledBatch {
  std::vector<std::size_t> low_energy_ids;   // one per nonempty cluster, minimal energy
  std::vector<std::size_t> high_energy_ids;  // one per nonempty cluster, maximal energy
};

/// Per nonempty cluster (in cluster order): the argmin- and argmax-energy
/// members. Ties go to the lowest sample index.
SampledBatch select_per_cluster(const ClusterAssignment& assignment, std::span<const double> energies);

/// Energy-based sampling of an auxiliary pool: features and energies from the
/// model, row-normalized features clustered into k groups, extremes picked per
/// cluster. Does not modify the model.
SampledBatch sample_batch(const MlpModel& model, const Matrix& pool, std::size_t k, std::uint64_t seed,
                          const KMeansOptions& options = {});

}  // namespace greg
