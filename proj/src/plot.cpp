#include "greg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace greg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 48.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(std::string_view title) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  out += "<title>" + escape(title) + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + escape(title) + "</text>\n";
  return out;
}

std::string legend(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  double y = kMargin;
  for (const auto& [label, color] : entries) {
    out += "<rect x=\"" + num(kWidth - 150) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           escape(color) + "\"/>\n";
    out += "<text x=\"" + num(kWidth - 135) + "\" y=\"" + num(y) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(label) + "</text>\n";
    y += 16;
  }
  return out;
}

struct Box {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

Box bounding_box(const std::vector<PointSeries>& series) {
  Box b{-1, 1, -1, 1};
  bool first = true;
  for (const auto& s : series) {
    for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
      const double x = s.points(i, 0), y = s.points(i, 1);
      if (first) {
        b = {x, x, y, y};
        first = false;
      }
      b.x0 = std::min(b.x0, x);
      b.x1 = std::max(b.x1, x);
      b.y0 = std::min(b.y0, y);
      b.y1 = std::max(b.y1, y);
    }
  }
  const double pad = 0.05 * std::max({b.x1 - b.x0, b.y1 - b.y0, 1e-6});
  return {b.x0 - pad, b.x1 + pad, b.y0 - pad, b.y1 + pad};
}

std::string frame(const Box& b) {
  std::string out = "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" +
                    num(kWidth - 2 * kMargin) + "\" height=\"" + num(kHeight - 2 * kMargin) +
                    "\" fill=\"none\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, std::string_view anchor, double v) {
    out += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + std::string(anchor) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + num(v) + "</text>\n";
  };
  label(kMargin, kHeight - kMargin + 14, "start", b.x0);
  label(kWidth - kMargin, kHeight - kMargin + 14, "end", b.x1);
  label(kMargin - 4, kHeight - kMargin, "end", b.y0);
  label(kMargin - 4, kMargin + 8, "end", b.y1);
  return out;
}

std::string points(const Box& b, const PointSeries& s) {
  std::string out = "<g fill=\"" + escape(s.color) + "\" fill-opacity=\"0.7\">\n";
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    out += "<circle cx=\"" + num(b.px(s.points(i, 0))) + "\" cy=\"" + num(b.py(s.points(i, 1))) + "\" r=\"1.6\"/>\n";
  }
  return out + "</g>\n";
}

void require_planar(const std::vector<PointSeries>& series) {
  for (const auto& s : series) {
    if (s.points.rows() > 0 && s.points.cols() != 2) throw ShapeError("plot: point series must be 2-D");
  }
}

}  // namespace

std::string scatter_svg(const std::vector<PointSeries>& series, std::string_view title) {
  require_planar(series);
  const Box b = bounding_box(series);
  std::string out = header(title) + frame(b);
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& s : series) {
    out += points(b, s);
    keys.emplace_back(s.label, s.color);
  }
  return out + legend(keys) + "</svg>\n";
}

std::string histogram_svg(const std::vector<double>& edges, const std::vector<HistogramSeries>& series,
                          std::string_view title, std::string_view x_label) {
  if (edges.size() < 2) throw InvalidArgument("histogram_svg: need at least one bin");
  std::size_t peak = 1;
  for (const auto& s : series) {
    if (s.counts.size() + 1 != edges.size()) throw ShapeError("histogram_svg: counts do not match the bin edges");
    for (auto c : s.counts) peak = std::max(peak, c);
  }
  const Box b{edges.front(), edges.back(), 0.0, static_cast<double>(peak)};
  std::string out = header(title) + frame(b);
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& s : series) {
    out += "<g fill=\"" + escape(s.color) + "\" fill-opacity=\"0.45\">\n";
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
      if (s.counts[i] == 0) continue;
      const double left = b.px(edges[i]), right = b.px(edges[i + 1]);
      const double top = b.py(static_cast<double>(s.counts[i]));
      out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(right - left) +
             "\" height=\"" + num(b.py(0.0) - top) + "\"/>\n";
    }
    out += "</g>\n";
    keys.emplace_back(s.label, s.color);
  }
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + escape(x_label) + "</text>\n";
  return out + legend(keys) + "</svg>\n";
}

std::string decision_raster_svg(const MlpModel& model, ScoreKind kind, double gamma, std::size_t resolution,
                                const std::vector<PointSeries>& series, std::string_view title) {
  require_planar(series);
  if (model.input_dim() != 2) throw ShapeError("decision_raster_svg: model input must be 2-D");
  if (resolution == 0) throw InvalidArgument("decision_raster_svg: resolution must be positive");
  const Box b = bounding_box(series);
  const auto n = static_cast<Eigen::Index>(resolution);
  Matrix grid(n * n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      grid(i * n + j, 0) = b.x0 + (static_cast<double>(j) + 0.5) / static_cast<double>(n) * (b.x1 - b.x0);
      grid(i * n + j, 1) = b.y0 + (static_cast<double>(i) + 0.5) / static_cast<double>(n) * (b.y1 - b.y0);
    }
  }
  const Vector s = score_inputs(model, grid, kind);
  const double lo = s.minCoeff(), hi = s.maxCoeff();
  const double cell_w = (kWidth - 2 * kMargin) / static_cast<double>(n);
  const double cell_h = (kHeight - 2 * kMargin) / static_cast<double>(n);

  std::string out = header(title) + "<g shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = s(i * n + j);
      // Distance from gamma on each side, scaled to [0, 1].
      const double t = v <= gamma ? (gamma - v) / std::max(gamma - lo, 1e-12) : (v - gamma) / std::max(hi - gamma, 1e-12);
      const int fade = static_cast<int>(std::lround(235.0 - 120.0 * std::clamp(t, 0.0, 1.0)));
      char color[16];
      if (v <= gamma) {
        std::snprintf(color, sizeof(color), "#%02x%02xff", fade, fade);
      } else {
        std::snprintf(color, sizeof(color), "#ff%02x%02x", fade, fade);
      }
      out += "<rect x=\"" + num(kMargin + static_cast<double>(j) * cell_w) + "\" y=\"" +
             num(kHeight - kMargin - static_cast<double>(i + 1) * cell_h) + "\" width=\"" + num(cell_w + 0.05) +
             "\" height=\"" + num(cell_h + 0.05) + "\" fill=\"" + color + "\"/>\n";
    }
  }
  out += "</g>\n" + frame(b);
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& p : series) {
    out += points(b, p);
    keys.emplace_back(p.label, p.color);
  }
  return out + legend(keys) + "</svg>\n";
}

}  // namespace greg
