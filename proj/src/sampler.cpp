#include "greg/sampler.hpp"

#include <limits>
#include <string>

#include "greg/rng.hpp"
#include "greg/scores.hpp"

namespace greg {

namespace {

/// Label of the nearest centroid for each point (lowest index on ties).
std::vector<int> assign(const Matrix& points, const Matrix& centroids, std::vector<double>& dist2) {
  const Eigen::Index n = points.rows();
  std::vector<int> labels(static_cast<std::size_t>(n));
  dist2.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    dist2[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

Matrix seed_centroids(const Matrix& points, std::size_t k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centroids;
}

ClusterAssignment lloyd(const Matrix& points, std::size_t k, Rng& rng, std::size_t max_iters) {
  ClusterAssignment result;
  result.centroids = seed_centroids(points, k, rng);
  std::vector<double> dist2;
  std::vector<int> previous;
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    result.labels = assign(points, result.centroids, dist2);
    double objective = 0.0;
    for (double d : dist2) objective += d;
    result.history.push_back(objective);
    result.iterations = iter + 1;
    if (result.labels == previous) break;
    previous = result.labels;

    Matrix sums = Matrix::Zero(result.centroids.rows(), points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      sums.row(result.labels[i]) += points.row(i);
      ++counts[static_cast<std::size_t>(result.labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto row = static_cast<Eigen::Index>(c);
      if (counts[c] > 0) {
        result.centroids.row(row) = sums.row(row) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      Eigen::Index far = 0;
      double worst = -1.0;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        if (dist2[i] > worst) {
          worst = dist2[i];
          far = i;
        }
      }
      result.centroids.row(row) = points.row(far);
      dist2[far] = 0.0;
    }
  }
  result.objective = kmeans_objective(points, result.centroids, result.labels);
  return result;
}

}  // namespace

double kmeans_objective(const Matrix& points, const Matrix& centroids, std::span<const int> labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total;
}

ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw InvalidArgument("kmeans: k must be at least 1");
  if (k > n) {
    throw InvalidArgument("kmeans: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
                          " points");
  }
  ClusterAssignment best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    Rng rng(Rng::derive(seed, r));
    ClusterAssignment candidate = lloyd(points, k, rng, options.max_iters);
    if (!have || candidate.objective < best.objective) {
      best = std::move(candidate);
      have = true;
    }
  }
  return best;
}

SampledBatch select_per_cluster(const ClusterAssignment& assignment, std::span<const double> energies) {
  if (energies.size() != assignment.labels.size()) {
    throw ShapeError("select_per_cluster: " + std::to_string(energies.size()) + " energies for " +
                     std::to_string(assignment.labels.size()) + " points");
  }
  const auto k = static_cast<std::size_t>(assignment.centroids.rows());
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> low(k, none), high(k, none);
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment.labels[i]);
    if (low[c] == none || energies[i] < energies[low[c]]) low[c] = i;
    if (high[c] == none || energies[i] > energies[high[c]]) high[c] = i;
  }
  SampledBatch batch;
  for (std::size_t c = 0; c < k; ++c) {
    if (low[c] == none) continue;
    batch.low_energy_ids.push_back(low[c]);
    batch.high_energy_ids.push_back(high[c]);
  }
  return batch;
}

SampledBatch sample_batch(const MlpModel& model, const Matrix& pool, std::size_t k, std::uint64_t seed,
                          const KMeansOptions& options) {
  if (static_cast<std::size_t>(pool.rows()) < k) {
    throw InvalidArgument("sample_batch: pool of " + std::to_string(pool.rows()) +
                          " is smaller than k = " + std::to_string(k));
  }
  const Matrix z = predict_features(model, pool);
  const Vector energies = energy_score(predict_logits(model, pool));
  const ClusterAssignment assignment = kmeans(normalize_rows(z), k, seed, options);
  return select_per_cluster(assignment, std::span<const double>(energies.data(), energies.size()));
}

}  // namespace greg
