#include "greg/eval.hpp"

#include <charconv>
#include <fstream>

namespace greg {

double overlap_coefficient(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw ShapeError("overlap_coefficient: bin counts differ");
  double total_a = 0.0, total_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total_a += static_cast<double>(a[i]);
    total_b += static_cast<double>(b[i]);
  }
  if (total_a == 0.0 || total_b == 0.0) return 0.0;
  double overlap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    overlap += std::min(static_cast<double>(a[i]) / total_a, static_cast<double>(b[i]) / total_b);
  }
  return overlap;
}

EvalReport evaluate_scores(const Vector& id_scores, const Vector& ood_scores, std::size_t bins) {
  EvalReport r;
  r.gamma = threshold_at_tpr(id_scores, 0.95);
  r.fpr95 = fpr_at_threshold(ood_scores, r.gamma);
  r.auroc = auroc(id_scores, ood_scores);
  r.id_scores = id_scores;
  r.ood_scores = ood_scores;
  double lo = std::min(id_scores.minCoeff(), ood_scores.minCoeff());
  double hi = std::max(id_scores.maxCoeff(), ood_scores.maxCoeff());
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const Histogram hid = histogram(id_scores, bins, lo, hi);
  const Histogram hood = histogram(ood_scores, bins, lo, hi);
  r.edges = hid.edges;
  r.id_counts = hid.counts;
  r.ood_counts = hood.counts;
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void write_scores(const Vector& scores, const std::filesystem::path& path) {
  auto out = open(path);
  out << "index,score\n";
  for (Eigen::Index i = 0; i < scores.size(); ++i) out << i << "," << fmt(scores(i)) << "\n";
}

}  // namespace

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  {
    auto out = open(dir / "eval.csv");
    out << "gamma,fpr95,auroc\n" << fmt(report.gamma) << "," << fmt(report.fpr95) << "," << fmt(report.auroc) << "\n";
  }
  write_scores(report.id_scores, dir / "scores_id.csv");
  write_scores(report.ood_scores, dir / "scores_ood.csv");
  auto out = open(dir / "hist.csv");
  out << "bin_lo,bin_hi,id_count,ood_count\n";
  for (std::size_t i = 0; i < report.id_counts.size(); ++i) {
    out << fmt(report.edges[i]) << "," << fmt(report.edges[i + 1]) << "," << report.id_counts[i] << ","
        << report.ood_counts[i] << "\n";
  }
}

}  // namespace greg
