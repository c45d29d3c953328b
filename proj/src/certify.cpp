#include "greg/certify.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "greg/rng.hpp"

namespace greg {

RadiusResult certified_radius(double score, double gamma, double lipschitz, double eps_cap, Side side) {
  if (!(lipschitz >= 0.0)) throw InvalidArgument("certified_radius: Lipschitz constant must be >= 0");
  if (!(eps_cap >= 0.0)) throw InvalidArgument("certified_radius: eps_cap must be >= 0");
  const bool correct = side == Side::Id ? score <= gamma : score > gamma;
  if (!correct) return {0.0, false};
  const double margin = side == Side::Id ? gamma - score : score - gamma;
  if (lipschitz == 0.0) return {eps_cap, true};
  return {std::min(eps_cap, margin / lipschitz), true};
}

double local_lipschitz_estimate(const MlpModel& model, const Vector& x, ScoreKind kind) {
  return score_input_gradient(model, x.transpose(), kind).row(0).norm();
}

double brute_force_lipschitz(const MlpModel& model, const Vector& x, double radius, std::size_t n_pairs,
                             std::uint64_t seed, ScoreKind kind) {
  if (!(radius > 0.0)) throw InvalidArgument("brute_force_lipschitz: radius must be positive");
  Rng rng(seed);
  const auto d = x.size();
  Matrix a(static_cast<Eigen::Index>(n_pairs), d), b(static_cast<Eigen::Index>(n_pairs), d);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    a.row(i) = uniform_in_ball(rng, x, radius).transpose();
    b.row(i) = uniform_in_ball(rng, x, radius).transpose();
  }
  const Vector sa = score_inputs(model, a, kind);
  const Vector sb = score_inputs(model, b, kind);
  double best = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dist = (a.row(i) - b.row(i)).norm();
    if (dist > 0.0) best = std::max(best, std::abs(sa(i) - sb(i)) / dist);
  }
  return best;
}

double sampled_lipschitz_bound(const MlpModel& model, const Vector& x, double radius, std::size_t samples,
                               double inflation, std::uint64_t seed, ScoreKind kind) {
  Rng rng(seed);
  Matrix points(static_cast<Eigen::Index>(samples) + 1, x.size());
  points.row(0) = x.transpose();
  for (Eigen::Index i = 1; i < points.rows(); ++i) {
    if (radius > 0.0) {
      points.row(i) = uniform_in_ball(rng, x, radius).transpose();
    } else {
      points.row(i) = x.transpose();
    }
  }
  return inflation * score_gradient_norms(model, points, kind).maxCoeff();
}

std::size_t verify_radius(const MlpModel& model, const Vector& x, double gamma, double eps_star,
                          std::size_t n_probes, std::uint64_t seed, ScoreKind kind) {
  if (!(eps_star > 0.0) || n_probes == 0) return 0;
  Rng rng(seed);
  Matrix probes(static_cast<Eigen::Index>(n_probes), x.size());
  for (Eigen::Index i = 0; i < probes.rows(); ++i) probes.row(i) = uniform_in_ball(rng, x, eps_star).transpose();
  const bool center_id = score_inputs(model, x.transpose(), kind)(0) <= gamma;
  const Vector s = score_inputs(model, probes, kind);
  std::size_t flips = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) flips += (s(i) <= gamma) != center_id;
  return flips;
}

std::vector<Certificate> certify_samples(const MlpModel& model, const Matrix& x, Side side, double gamma,
                                         const CertifyOptions& options, std::uint64_t seed) {
  const Vector scores = score_inputs(model, x, options.kind);
  std::vector<Certificate> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto stream = Rng::derive(seed, static_cast<std::uint64_t>(i));
    const Vector center = x.row(i).transpose();
    Certificate c;
    c.index = static_cast<std::size_t>(i);
    c.side = side;
    c.score = scores(i);
    c.eps_cap = options.eps_cap;
    c.lipschitz = sampled_lipschitz_bound(model, center, options.eps_cap, options.lipschitz_samples,
                                          options.inflation, Rng::derive(stream, 0), options.kind);
    const RadiusResult r = certified_radius(c.score, gamma, c.lipschitz, options.eps_cap, side);
    c.eps_star = r.radius;
    c.correct_side = r.correct_side;
    c.violations = verify_radius(model, center, gamma, c.eps_star, options.probes, Rng::derive(stream, 1),
                                 options.kind);
    out.push_back(c);
  }
  return out;
}

std::vector<double> certified_fraction(const std::vector<Certificate>& certs, const std::vector<double>& radii) {
  std::vector<double> out;
  for (double r : radii) {
    std::size_t hits = 0;
    for (const auto& c : certs) hits += c.correct_side && c.eps_star >= r;
    out.push_back(certs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(certs.size()));
  }
  return out;
}

void write_certificates(const std::vector<Certificate>& certs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  auto fmt = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  out << "index,label,score,lipschitz,eps_cap,eps_star,violations\n";
  for (const auto& c : certs) {
    out << c.index << "," << (c.side == Side::Id ? "id" : "ood") << "," << fmt(c.score) << ","
        << fmt(c.lipschitz) << "," << fmt(c.eps_cap) << "," << fmt(c.eps_star) << "," << c.violations << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace greg
