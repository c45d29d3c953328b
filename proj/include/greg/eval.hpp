#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "greg/tensor.hpp"

namespace greg {

namespace detail {
template <typename Derived>
std::vector<typename Derived::Scalar> to_std(const Eigen::DenseBase<Derived>& v) {
  std::vector<typename Derived::Scalar> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

template <typename Derived>
void require_nonempty(const Eigen::DenseBase<Derived>& v, const char* what) {
  if (v.size() == 0) throw InvalidArgument(std::string(what) + ": empty score set");
}
}  // namespace detail

/// The ceil(tpr * n)-th smallest ID score: at least a `tpr` fraction of ID
/// scores satisfy S <= gamma. No interpolation.
template <typename Derived>
typename Derived::Scalar threshold_at_tpr(const Eigen::DenseBase<Derived>& id_scores, double tpr) {
  detail::require_nonempty(id_scores, "threshold_at_tpr");
  if (!(tpr > 0.0 && tpr <= 1.0)) throw InvalidArgument("threshold_at_tpr: tpr must lie in (0, 1]");
  auto sorted = detail::to_std(id_scores);
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Guard the product against representation error, e.g. 0.95 * 100.
  auto rank = static_cast<std::size_t>(std::ceil(tpr * n - 1e-9 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

/// Fraction of OOD scores labeled ID (S <= gamma).
template <typename Derived>
double fpr_at_threshold(const Eigen::DenseBase<Derived>& ood_scores, typename Derived::Scalar gamma) {
  detail::require_nonempty(ood_scores, "fpr_at_threshold");
  return static_cast<double>((ood_scores.derived().array() <= gamma).count()) /
         static_cast<double>(ood_scores.size());
}

/// False-positive rate on OOD at the 95% ID true-positive threshold.
template <typename DerivedA, typename DerivedB>
double fpr95(const Eigen::DenseBase<DerivedA>& id_scores, const Eigen::DenseBase<DerivedB>& ood_scores) {
  detail::require_nonempty(ood_scores, "fpr95");
  return fpr_at_threshold(ood_scores, threshold_at_tpr(id_scores, 0.95));
}

/// P(S_id < S_ood) + 0.5 P(S_id == S_ood), from one sorted sweep over tie
/// groups. Counts are kept in half-units so the result is exact.
template <typename DerivedA, typename DerivedB>
double auroc(const Eigen::DenseBase<DerivedA>& id_scores, const Eigen::DenseBase<DerivedB>& ood_scores) {
  detail::require_nonempty(id_scores, "auroc");
  detail::require_nonempty(ood_scores, "auroc");
  using Scalar = typename DerivedA::Scalar;
  std::vector<std::pair<Scalar, bool>> all;  // (score, is_ood)
  all.reserve(static_cast<std::size_t>(id_scores.size() + ood_scores.size()));
  for (Eigen::Index i = 0; i < id_scores.size(); ++i) all.emplace_back(id_scores(i), false);
  for (Eigen::Index i = 0; i < ood_scores.size(); ++i) all.emplace_back(ood_scores(i), true);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::uint64_t half_units = 0;
  std::uint64_t id_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t ids = 0, oods = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? oods : ids) += 1;
      ++j;
    }
    half_units += 2 * oods * id_below + oods * ids;
    id_below += ids;
    i = j;
  }
  const double pairs = static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size());
  return static_cast<double>(half_units) / (2.0 * pairs);
}

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

/// Uniform bins over [lo, hi]. Bins are right-closed, (e_i, e_{i+1}], with the
/// first bin also holding lo; out-of-range values clamp to the end bins.
template <typename Derived>
Histogram histogram(const Eigen::DenseBase<Derived>& scores, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw InvalidArgument("histogram: need at least one bin");
  if (!(hi > lo)) throw InvalidArgument("histogram: inverted or empty range");
  Histogram h;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + width * static_cast<double>(i));
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double t = (static_cast<double>(scores(i)) - lo) / width;
    const double slot = std::ceil(t) - 1.0;
    const auto idx = slot < 0.0 ? std::size_t{0}
                                : std::min(bins - 1, static_cast<std::size_t>(std::min(slot, 1e18)));
    ++h.counts[idx];
  }
  return h;
}

/// Sum over bins of min(p_i, q_i) for the two normalized count vectors.
double overlap_coefficient(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

struct EvalReport {
  double gamma = 0.0;
  double fpr95 = 0.0;
  double auroc = 0.0;
  Vector id_scores;
  Vector ood_scores;
  std::vector<double> edges;
  std::vector<std::size_t> id_counts;
  std::vector<std::size_t> ood_counts;

  double overlap() const { return overlap_coefficient(id_counts, ood_counts); }
};

/// Threshold, metrics and a shared-range histogram of both score sets.
EvalReport evaluate_scores(const Vector& id_scores, const Vector& ood_scores, std::size_t bins = 50);

/// eval.csv (gamma,fpr95,auroc), scores_id.csv, scores_ood.csv, hist.csv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace greg
