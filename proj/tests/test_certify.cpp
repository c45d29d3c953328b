#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "greg/certify.hpp"
#include "support/oracles.hpp"

using namespace greg;

namespace {

// Two identical logits w.x: S = -(w.x) - ln 2, an affine score with slope -w.
MlpModel affine_model(double w0, double w1) {
  const Matrix W = (Matrix(2, 2) << w0, w1, w0, w1).finished();
  return MlpModel({}, Tensor::from_matrix(W), Tensor::from_vector(Vector::Zero(2)));
}

MlpModel constant_model() {
  return MlpModel({}, Tensor::from_matrix(Matrix::Zero(3, 2)), Tensor::from_vector((Vector(3) << 1, 2, 3).finished()));
}

}  // namespace

TEST_CASE("certified radius examples") {
  CHECK(certified_radius(-2, 0, 0.5, 10, Side::Id).radius == 4.0);
  CHECK(certified_radius(-2, 0, 0.5, 10, Side::Id).correct_side);
  CHECK(certified_radius(1.5, 1.5, 2.0, 10, Side::Id).radius == 0.0);
  CHECK(certified_radius(-100, 0, 1.0, 3, Side::Id).radius == 3.0);
  CHECK(certified_radius(4, 1, 2.0, 10, Side::Ood).radius == 1.5);

  const RadiusResult wrong = certified_radius(1, 0, 1.0, 10, Side::Id);
  CHECK_FALSE(wrong.correct_side);
  CHECK(wrong.radius == 0.0);
  CHECK_FALSE(certified_radius(-1, 0, 1.0, 10, Side::Ood).correct_side);
  // A sample exactly at gamma is labeled ID, so on the wrong side as OOD.
  CHECK_FALSE(certified_radius(0, 0, 1.0, 10, Side::Ood).correct_side);

  CHECK(certified_radius(-2, 0, 0.0, 0.7, Side::Id).radius == 0.7);
}

TEST_CASE("certified radius is non-increasing in L") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const double s = rng.uniform(-10, 0);
    const double cap = rng.uniform(0, 5);
    double prev = INFINITY;
    for (double l = 0.01; l < 100; l *= 1.7) {
      const double r = certified_radius(s, 0.0, l, cap, Side::Id).radius;
      CHECK(r <= prev);
      CHECK(r >= 0.0);
      CHECK(r <= cap);
      prev = r;
    }
  }
}

TEST_CASE("local Lipschitz estimate examples") {
  CHECK(local_lipschitz_estimate(constant_model(), Vector::Zero(2), ScoreKind::Energy) == 0.0);
  const MlpModel lin({}, Tensor::from_matrix(Matrix::Identity(2, 2)), Tensor::from_vector(Vector::Zero(2)));
  CHECK(local_lipschitz_estimate(lin, Vector::Zero(2), ScoreKind::Energy) == doctest::Approx(0.707107).epsilon(1e-6));
  CHECK(local_lipschitz_estimate(affine_model(3, 4), Vector::Ones(2), ScoreKind::Energy) ==
        doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("local estimate inside a linear region is the norm of the softmax-weighted Jacobian") {
  const MlpModel m = init_model(ModelSpec{}, 5);
  Rng rng(5);
  for (int regions = 0; regions < 5;) {
    const Vector x = oracle::random_matrix(rng, 2, 1, -3, 3);
    if (boundary_margin(m, x) < 1e-6) continue;
    const double r = probe_linear_region(m, x, rng);
    ++regions;
    const LocalAffine local = local_affine(m, activation_pattern(m, x));
    for (int i = 0; i < 20; ++i) {
      const Vector p = uniform_in_ball(rng, x, r);
      Vector z = local.A * p + local.c;
      Vector soft = (z.array() - z.maxCoeff()).exp();
      soft /= soft.sum();
      CHECK(std::abs(local_lipschitz_estimate(m, p, ScoreKind::Energy) - (soft.transpose() * local.A).norm()) < 1e-9);
    }
  }
}

TEST_CASE("brute-force Lipschitz oracle") {
  CHECK(brute_force_lipschitz(constant_model(), Vector::Zero(2), 1.0, 100, 1, ScoreKind::Energy) == 0.0);
  const double g = brute_force_lipschitz(affine_model(3, 4), Vector::Ones(2), 0.5, 10000, 2, ScoreKind::Energy);
  CHECK(g >= 0.99 * 5.0);
  CHECK(g <= 5.0 * (1 + 1e-9));

  // Mean-value consistency against the densely sampled gradient maximum.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MlpModel m = init_model(ModelSpec{}, seed);
    Rng rng(seed);
    const Vector x = oracle::random_matrix(rng, 2, 1, -3, 3);
    const double oracle_l = brute_force_lipschitz(m, x, 0.3, 2000, seed, ScoreKind::Energy);
    const double sampled = sampled_lipschitz_bound(m, x, 0.3, 20000, 1.0, seed + 100, ScoreKind::Energy);
    CHECK(oracle_l <= sampled * (1 + 1e-6));
    CHECK(oracle_l > 0.0);
  }
}

TEST_CASE("sampled bound includes the centre and the inflation") {
  const MlpModel m = init_model(ModelSpec{}, 9);
  const Vector x = (Vector(2) << 0.5, -1.0).finished();
  const double center = local_lipschitz_estimate(m, x, ScoreKind::Energy);
  CHECK(sampled_lipschitz_bound(m, x, 0.0, 0, 1.0, 1, ScoreKind::Energy) == doctest::Approx(center));
  const double plain = sampled_lipschitz_bound(m, x, 0.2, 64, 1.0, 3, ScoreKind::Energy);
  CHECK(plain >= center);
  CHECK(sampled_lipschitz_bound(m, x, 0.2, 64, 1.05, 3, ScoreKind::Energy) == doctest::Approx(1.05 * plain));
}

TEST_CASE("verify radius") {
  const MlpModel m = init_model(ModelSpec{}, 3);
  CHECK(verify_radius(m, Vector::Ones(2), 0.0, 0.0, 100, 1, ScoreKind::Energy) == 0);

  // Affine score: exact L gives a sound radius for any probe count.
  const MlpModel a = affine_model(1.0, -2.0);
  const double L = std::sqrt(5.0);
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Vector x = oracle::random_matrix(rng, 2, 1, -2, 2);
    const double s = score_inputs(a, x.transpose(), ScoreKind::Energy)(0);
    const double gamma = s + rng.uniform(0.01, 1.0);
    const RadiusResult r = certified_radius(s, gamma, L, 10.0, Side::Id);
    CHECK(verify_radius(a, x, gamma, r.radius, 2000, static_cast<std::uint64_t>(t), ScoreKind::Energy) == 0);
    // Doubling the radius past the boundary must expose flips.
    CHECK(verify_radius(a, x, gamma, 2.0 * r.radius, 2000, static_cast<std::uint64_t>(t), ScoreKind::Energy) > 0);
  }
}

TEST_CASE("certify samples and fractions") {
  const MlpModel m = init_model(ModelSpec{}, 6);
  Rng rng(6);
  const Matrix x = oracle::random_matrix(rng, 12, 2, -3, 3);
  const Vector s = score_inputs(m, x, ScoreKind::Energy);
  const double gamma = (s.minCoeff() + s.maxCoeff()) / 2;
  CertifyOptions opt;
  opt.lipschitz_samples = 64;
  opt.probes = 200;
  const auto certs = certify_samples(m, x, Side::Id, gamma, opt, 7);
  REQUIRE(certs.size() == 12);
  int correct = 0;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const Certificate& c = certs[i];
    CHECK(c.index == i);
    CHECK(c.score == s(static_cast<Eigen::Index>(i)));
    CHECK(c.correct_side == (c.score <= gamma));
    CHECK((c.eps_star >= 0.0 && c.eps_star <= opt.eps_cap));
    if (!c.correct_side) CHECK(c.eps_star == 0.0);
    correct += c.correct_side;
  }
  CHECK(certify_samples(m, x, Side::Id, gamma, opt, 7).front().eps_star == certs.front().eps_star);

  const std::vector<double> radii{0.0, 0.05, 0.1, 0.3, 0.5, 1.0};
  const auto frac = certified_fraction(certs, radii);
  CHECK(frac[0] == doctest::Approx(correct / 12.0));
  for (std::size_t i = 1; i < frac.size(); ++i) CHECK(frac[i] <= frac[i - 1]);
  CHECK(frac.back() == 0.0);

  CertifyOptions zero = opt;
  zero.eps_cap = 0.0;
  for (const auto& c : certify_samples(m, x, Side::Id, gamma, zero, 7)) CHECK(c.eps_star == 0.0);
}

TEST_CASE("certificate csv") {
  const std::vector<Certificate> certs{{0, Side::Id, -3.5, 2.0, 0.5, 0.25, true, 0},
                                       {1, Side::Ood, 1.0, 1.0, 0.5, 0.0, false, 0}};
  const auto path = std::filesystem::temp_directory_path() / "greg_certs.csv";
  write_certificates(certs, path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "index,label,score,lipschitz,eps_cap,eps_star,violations");
  CHECK(row.rfind("0,", 0) == 0);
  std::filesystem::remove(path);
}
