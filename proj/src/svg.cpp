#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "jmdiag/diagnostics.hpp"

namespace jmdiag {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 56.0;

std::string fmt(double v) {
  if (std::fabs(v) < 0.0005) v = 0.0;  // avoid "-0.000"
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", v);
  return buffer;
}

// Maps data coordinates to the fixed canvas; degenerate ranges get padding.
class Frame {
 public:
  Frame(double x_min, double x_max, double y_min, double y_max) {
    if (!(x_max > x_min)) {
      x_min -= 0.5;
      x_max += 0.5;
    }
    if (!(y_max > y_min)) {
      y_min -= 0.5;
      y_max += 0.5;
    }
    const double x_pad = 0.04 * (x_max - x_min);
    const double y_pad = 0.08 * (y_max - y_min);
    x_min_ = x_min - x_pad;
    x_max_ = x_max + x_pad;
    y_min_ = y_min - y_pad;
    y_max_ = y_max + y_pad;
  }

  double x(double v) const {
    return kMargin + (v - x_min_) / (x_max_ - x_min_) * (kWidth - 2 * kMargin);
  }
  double y(double v) const {
    return kHeight - kMargin - (v - y_min_) / (y_max_ - y_min_) * (kHeight - 2 * kMargin);
  }
  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }

 private:
  double x_min_, x_max_, y_min_, y_max_;
};

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Frame& frame, const std::string& x_label,
               const std::string& y_label) {
  out << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  out << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kHeight - kMargin) << "\" x2=\""
      << fmt(kWidth - kMargin) << "\" y2=\"" << fmt(kHeight - kMargin) << "\"/>\n";
  out << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kMargin) << "\" x2=\"" << fmt(kMargin)
      << "\" y2=\"" << fmt(kHeight - kMargin) << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = frame.x_min() + i * (frame.x_max() - frame.x_min()) / 4.0;
    const double fy = frame.y_min() + i * (frame.y_max() - frame.y_min()) / 4.0;
    out << "<text x=\"" << fmt(frame.x(fx)) << "\" y=\"" << fmt(kHeight - kMargin + 16)
        << "\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
    out << "<text x=\"" << fmt(kMargin - 6) << "\" y=\"" << fmt(frame.y(fy) + 4)
        << "\" text-anchor=\"end\">" << fmt(fy) << "</text>\n";
  }
  out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"" << fmt(kHeight - 12)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt(kHeight / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << fmt(kHeight / 2) << ")\">" << y_label << "</text>\n";
  out << "</g>\n";
}

std::string close_svg(std::ostringstream& out) {
  out << "</svg>\n";
  return out.str();
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const Frame& frame,
                     const std::string& stroke, const std::string& extra = "") {
  std::ostringstream out;
  out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" " << extra << "points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out << ' ';
    out << fmt(frame.x(pts[i].first)) << ',' << fmt(frame.y(pts[i].second));
  }
  out << "\"/>\n";
  return out.str();
}

std::string band_polygon(const std::vector<std::pair<double, double>>& upper,
                         const std::vector<std::pair<double, double>>& lower, const Frame& frame,
                         const std::string& fill) {
  std::ostringstream out;
  out << "<polygon fill=\"" << fill << "\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < upper.size(); ++i) {
    if (i) out << ' ';
    out << fmt(frame.x(upper[i].first)) << ',' << fmt(frame.y(upper[i].second));
  }
  for (std::size_t i = lower.size(); i-- > 0;) {
    out << ' ' << fmt(frame.x(lower[i].first)) << ',' << fmt(frame.y(lower[i].second));
  }
  out << "\"/>\n";
  return out.str();
}

}  // namespace

std::string render_wormplot_svg(const std::vector<WormPoint>& points) {
  double x_min = 0.0, x_max = 1.0, y_min = -0.5, y_max = 0.5;
  if (!points.empty()) {
    x_min = std::numeric_limits<double>::infinity();
    x_max = -x_min;
    y_min = std::numeric_limits<double>::infinity();
    y_max = -y_min;
    for (const auto& p : points) {
      x_min = std::min(x_min, p.time);
      x_max = std::max(x_max, p.time);
      y_min = std::min({y_min, p.lower, p.detrended_pd});
      y_max = std::max({y_max, p.upper, p.detrended_pd});
    }
  }
  Frame frame(x_min, x_max, y_min, y_max);
  std::ostringstream out;
  open_svg(out, "De-trended TTE prediction discrepancies");
  draw_axes(out, frame, "event/censoring time (days)", "de-trended pd");
  out << "<line x1=\"" << fmt(frame.x(frame.x_min())) << "\" y1=\"" << fmt(frame.y(0.0))
      << "\" x2=\"" << fmt(frame.x(frame.x_max())) << "\" y2=\"" << fmt(frame.y(0.0))
      << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& p : points) {
    out << "<line x1=\"" << fmt(frame.x(p.time)) << "\" y1=\"" << fmt(frame.y(p.lower))
        << "\" x2=\"" << fmt(frame.x(p.time)) << "\" y2=\"" << fmt(frame.y(p.upper))
        << "\" stroke=\"#9ecae1\" stroke-width=\"2\"/>\n";
  }
  for (const auto& p : points) {
    out << "<circle cx=\"" << fmt(frame.x(p.time)) << "\" cy=\"" << fmt(frame.y(p.detrended_pd))
        << "\" r=\"3\" fill=\"" << (p.censored ? "white" : "#08519c") << "\" stroke=\"#08519c\"/>\n";
  }
  return close_svg(out);
}

std::string render_percentile_bands_svg(const std::vector<PercentileBand>& bands) {
  double x_min = 0.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
  if (!bands.empty()) {
    x_min = std::numeric_limits<double>::infinity();
    x_max = -x_min;
    y_min = std::numeric_limits<double>::infinity();
    y_max = -y_min;
    for (const auto& band : bands) {
      x_min = std::min(x_min, band.bin_center);
      x_max = std::max(x_max, band.bin_center);
      for (const auto& e : band.percentiles) {
        y_min = std::min({y_min, e.lower, e.observed});
        y_max = std::max({y_max, e.upper, e.observed});
      }
    }
  }
  Frame frame(x_min, x_max, y_min, y_max);
  std::ostringstream out;
  open_svg(out, "Longitudinal npd percentiles vs theoretical intervals");
  draw_axes(out, frame, "time (days)", "npd");
  const char* fills[3] = {"#deebf7", "#c6dbef", "#deebf7"};
  for (int level = 0; level < 3; ++level) {
    std::vector<std::pair<double, double>> upper, lower, observed;
    for (const auto& band : bands) {
      upper.emplace_back(band.bin_center, band.percentiles[level].upper);
      lower.emplace_back(band.bin_center, band.percentiles[level].lower);
      observed.emplace_back(band.bin_center, band.percentiles[level].observed);
    }
    if (!bands.empty()) {
      out << band_polygon(upper, lower, frame, fills[level]);
      out << polyline(observed, frame, "#08519c", "stroke-width=\"1.5\" ");
    }
  }
  return close_svg(out);
}

std::string render_km_vpc_svg(const KmVpc& vpc) {
  double x_min = 0.0, x_max = 1.0;
  if (!vpc.bands.empty()) {
    x_min = std::numeric_limits<double>::infinity();
    x_max = -x_min;
    for (const auto& band : vpc.bands) {
      x_min = std::min(x_min, band.time);
      x_max = std::max(x_max, band.time);
    }
  }
  Frame frame(x_min, x_max, 0.0, 1.0);
  std::ostringstream out;
  open_svg(out, "Kaplan-Meier visual predictive check");
  draw_axes(out, frame, "time (days)", "event-free probability");
  if (!vpc.bands.empty()) {
    std::vector<std::pair<double, double>> upper, lower, median, observed;
    for (const auto& band : vpc.bands) {
      upper.emplace_back(band.time, band.p95);
      lower.emplace_back(band.time, band.p5);
      median.emplace_back(band.time, band.p50);
      observed.emplace_back(band.time, band.observed);
    }
    out << band_polygon(upper, lower, frame, "#fee0d2");
    out << polyline(median, frame, "#de2d26", "stroke-width=\"1.5\" stroke-dasharray=\"5 3\" ");
    out << polyline(observed, frame, "black", "stroke-width=\"1.5\" ");
  }
  return close_svg(out);
}

}  // namespace jmdiag
