#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "greg/sampler.hpp"
#include "greg/scores.hpp"
#include "support/blobs.hpp"
#include "support/oracles.hpp"

using namespace greg;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : v) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

ClusterAssignment single_cluster(std::size_t n) {
  ClusterAssignment a;
  a.centroids = Matrix::Zero(1, 1);
  a.labels.assign(n, 0);
  return a;
}

}  // namespace

TEST_CASE("row normalization examples") {
  CHECK(normalize_rows(rows({{1, 0}})) == rows({{1, 0}}));
  const Matrix z = normalize_rows(rows({{3, 4}, {0, 0}}));
  CHECK(z(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(z(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(z.row(1).isZero());
}

TEST_CASE("kmeans examples") {
  const Matrix pts = rows({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  const ClusterAssignment a = kmeans(pts, 2, 1, {100, 3});
  CHECK(a.labels[0] == a.labels[1]);
  CHECK(a.labels[2] == a.labels[3]);
  CHECK(a.labels[0] != a.labels[2]);
  CHECK(a.objective == doctest::Approx(1.0));

  Rng rng(2);
  const Matrix rnd = oracle::random_matrix(rng, 6, 2, -1, 1);
  const ClusterAssignment each = kmeans(rnd, 6, 3);
  CHECK(each.objective == 0.0);
  CHECK(std::set<int>(each.labels.begin(), each.labels.end()).size() == 6);

  CHECK_THROWS_AS(kmeans(rnd, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(kmeans(rnd, 7, 1), InvalidArgument);
}

TEST_CASE("kmeans reaches the exhaustive two-partition optimum") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const Matrix pts = oracle::random_matrix(rng, 8, 2, -5, 5);
    const ClusterAssignment a = kmeans(pts, 2, static_cast<std::uint64_t>(t), {100, 50});
    CHECK(a.objective == doctest::Approx(oracle::best_two_partition(pts)).epsilon(1e-12));
  }
}

TEST_CASE("kmeans objective history is non-increasing and consistent") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix pts = oracle::random_matrix(rng, 60, 3, -5, 5);
    const ClusterAssignment a = kmeans(pts, 5, static_cast<std::uint64_t>(t), {100, 1});
    for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i] <= a.history[i - 1] + 1e-12);
    CHECK(a.objective == doctest::Approx(kmeans_objective(pts, a.centroids, a.labels)));
    for (int l : a.labels) CHECK((l >= 0 && l < 5));
    // At a fixpoint every nonempty centroid is the mean of its members.
    if (a.iterations < 100) {
      for (int c = 0; c < 5; ++c) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(3);
        int count = 0;
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
          if (a.labels[i] == c) {
            sum += pts.row(static_cast<Eigen::Index>(i));
            ++count;
          }
        }
        if (count > 0) CHECK((sum / count - a.centroids.row(c)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("kmeans is deterministic and scale-free after normalization") {
  Rng rng(5);
  const Matrix z = oracle::random_matrix(rng, 80, 4, -3, 3);
  const ClusterAssignment a = kmeans(normalize_rows(z), 6, 9, {50, 2});
  const ClusterAssignment b = kmeans(normalize_rows(z), 6, 9, {50, 2});
  CHECK(a.labels == b.labels);
  CHECK(a.centroids == b.centroids);

  for (int t = 0; t < 10; ++t) {
    Matrix scaled = z;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= rng.uniform(0.01, 100.0);
    CHECK(kmeans(normalize_rows(scaled), 6, 9, {50, 2}).labels == a.labels);
  }
}

TEST_CASE("select per cluster examples") {
  const std::vector<double> e{-5, 0, 3};
  const SampledBatch s = select_per_cluster(single_cluster(3), e);
  CHECK(s.low_energy_ids == std::vector<std::size_t>{0});
  CHECK(s.high_energy_ids == std::vector<std::size_t>{2});

  const SampledBatch one = select_per_cluster(single_cluster(1), std::vector<double>{4.0});
  CHECK(one.low_energy_ids == one.high_energy_ids);

  const SampledBatch tie = select_per_cluster(single_cluster(2), std::vector<double>{1, 1});
  CHECK(tie.low_energy_ids == std::vector<std::size_t>{0});
  CHECK(tie.high_energy_ids == std::vector<std::size_t>{0});

  // Empty clusters contribute nothing.
  ClusterAssignment gap;
  gap.centroids = Matrix::Zero(3, 1);
  gap.labels = {0, 2, 2, 0};
  const SampledBatch g = select_per_cluster(gap, std::vector<double>{1, 5, -2, 0});
  CHECK(g.low_energy_ids == std::vector<std::size_t>{3, 2});
  CHECK(g.high_energy_ids == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(select_per_cluster(gap, std::vector<double>{1}), ShapeError);
}

TEST_CASE("sample batch on a pool of exactly k points") {
  const MlpModel m = init_model(ModelSpec{}, 3);
  Rng rng(6);
  const Matrix pool = oracle::random_matrix(rng, 10, 2, -5, 5);
  const SampledBatch s = sample_batch(m, pool, 10, 1);
  std::set<std::size_t> seen(s.low_energy_ids.begin(), s.low_energy_ids.end());
  seen.insert(s.high_energy_ids.begin(), s.high_energy_ids.end());
  // Distinct points can share a normalized feature (e.g. all-zero), which
  // empties a cluster; with this seed every point keeps its own.
  CHECK(seen.size() == 10);
  CHECK_THROWS_AS(sample_batch(m, pool, 11, 1), InvalidArgument);
}

TEST_CASE("sample batch selections") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MlpModel m = init_model(ModelSpec{}, seed);
    Rng rng(seed + 40);
    const Matrix pool = oracle::random_matrix(rng, 256, 2, -7, 7);
    const std::size_t k = 16;
    const SampledBatch a = sample_batch(m, pool, k, seed, {20, 1});
    const SampledBatch b = sample_batch(m, pool, k, seed, {20, 1});
    CHECK(a.low_energy_ids == b.low_energy_ids);
    CHECK(a.high_energy_ids == b.high_energy_ids);
    CHECK(a.low_energy_ids.size() <= k);
    CHECK(a.low_energy_ids.size() == a.high_energy_ids.size());

    const Vector e = energy_score(predict_logits(m, pool));
    double low = 0.0, high = 0.0;
    for (std::size_t i : a.low_energy_ids) {
      CHECK(i < 256);
      low += e(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i : a.high_energy_ids) high += e(static_cast<Eigen::Index>(i));
    low /= static_cast<double>(a.low_energy_ids.size());
    high /= static_cast<double>(a.high_energy_ids.size());
    CHECK(low < e.mean());
    CHECK(high > e.mean());
  }
}

TEST_CASE("sampling leaves the model untouched") {
  const MlpModel m = init_model(ModelSpec{}, 8);
  const MlpModel copy = m;
  Rng rng(8);
  sample_batch(m, oracle::random_matrix(rng, 64, 2, -5, 5), 8, 2);
  CHECK(m == copy);
}

TEST_CASE("clustered selection covers every blob while greedy does not") {
  const std::size_t k = 6;
  Rng rng(9);
  const blobs::Pool pool = blobs::make_pool(k, 30, rng);
  const MlpModel m = blobs::feature_model();
  const SampledBatch s = sample_batch(m, pool.points, k, 3, {50, 5});
  std::set<int> covered;
  for (std::size_t i : s.low_energy_ids) covered.insert(pool.blob[i]);
  for (std::size_t i : s.high_energy_ids) covered.insert(pool.blob[i]);
  CHECK(covered.size() == k);

  const Vector e = energy_score(predict_logits(m, pool.points));
  std::vector<std::size_t> order(static_cast<std::size_t>(e.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return e(static_cast<Eigen::Index>(a)) > e(static_cast<Eigen::Index>(b));
  });
  std::set<int> greedy;
  for (std::size_t i = 0; i < 2 * k; ++i) greedy.insert(pool.blob[order[i]]);
  CHECK(greedy.size() < k);
}
