#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "greg/model.hpp"
#include "greg/scores.hpp"

namespace greg {

// Self-contained SVG documents: no scripts, fonts or external references.

struct PointSeries {
  std::string label;
  std::string color;  // any SVG color, e.g. "#1f77b4"
  Matrix points;      // n x 2
};

struct HistogramSeries {
  std::string label;
  std::string color;
  std::vector<std::size_t> counts;
};

std::string scatter_svg(const std::vector<PointSeries>& series, std::string_view title);

/// Bars for each series drawn over shared bin `edges`, semi-transparent so
/// overlaps stay visible.
std::string histogram_svg(const std::vector<double>& edges, const std::vector<HistogramSeries>& series,
                          std::string_view title, std::string_view x_label);

/// Score raster of a 2-D model over the box spanned by `series` (padded),
/// shaded by score and split at `gamma`, with the points on top.
std::string decision_raster_svg(const MlpModel& model, ScoreKind kind, double gamma, std::size_t resolution,
                                const std::vector<PointSeries>& series, std::string_view title);

}  // namespace greg
