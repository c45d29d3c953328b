#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "greg/model.hpp"
#include "greg/scores.hpp"

namespace greg {

enum class Side { Id, Ood };

struct RadiusResult {
  double radius = 0.0;
  bool correct_side = false;  // false: sample is on the wrong side of gamma, radius forced to 0
};

/// ID:  min(cap, (gamma - S) / L)   valid when S <= gamma
/// OOD: min(cap, (S - gamma) / L)   valid when S > gamma
/// L = 0 means a constant score, for which the cap alone binds.
RadiusResult certified_radius(double score, double gamma, double lipschitz, double eps_cap, Side side);

/// ||grad_x S(x)||_2, which equals the local Lipschitz constant of S inside the
/// linear region of a piecewise-linear network containing x.
double local_lipschitz_estimate(const MlpModel& model, const Vector& x, ScoreKind kind);

/// max |S(a) - S(b)| / ||a - b|| over `n_pairs` uniform pairs in B(x, radius).
/// Under-approximates the Lipschitz constant on the ball.
double brute_force_lipschitz(const MlpModel& model, const Vector& x, double radius, std::size_t n_pairs,
                             std::uint64_t seed, ScoreKind kind);

/// Max pointwise gradient norm over the center and `samples` uniform points of
/// B(x, radius), times `inflation`. A heuristic upper estimate of the regional
/// Lipschitz constant.
double sampled_lipschitz_bound(const MlpModel& model, const Vector& x, double radius, std::size_t samples,
                               double inflation, std::uint64_t seed, ScoreKind kind);

/// Number of uniform probes in B(x, eps_star) whose label (S <= gamma) differs
/// from the label of x.
std::size_t verify_radius(const MlpModel& model, const Vector& x, double gamma, double eps_star,
                          std::size_t n_probes, std::uint64_t seed, ScoreKind kind);

struct Certificate {
  std::size_t index = 0;
  Side side = Side::Id;
  double score = 0.0;
  double lipschitz = 0.0;
  double eps_cap = 0.0;
  double eps_star = 0.0;
  bool correct_side = false;
  std::size_t violations = 0;
};

struct CertifyOptions {
  ScoreKind kind = ScoreKind::Energy;
  double eps_cap = 0.5;
  std::size_t lipschitz_samples = 256;
  double inflation = 1.05;
  std::size_t probes = 1000;
};

/// Certificates for every row of `x`, all on `side`. Sample i draws from the
/// stream Rng::derive(seed, i).
std::vector<Certificate> certify_samples(const MlpModel& model, const Matrix& x, Side side, double gamma,
                                         const CertifyOptions& options, std::uint64_t seed);

/// Fraction of `certs` on the correct side with eps_star >= r, for each r.
std::vector<double> certified_fraction(const std::vector<Certificate>& certs, const std::vector<double>& radii);

/// index,label,score,lipschitz,eps_cap,eps_star,violations
void write_certificates(const std::vector<Certificate>& certs, const std::filesystem::path& path);

}  // namespace greg
