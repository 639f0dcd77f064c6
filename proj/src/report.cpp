#include "dslab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dslab/tensor.hpp"

namespace dslab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
}

namespace {
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr double kMarginL = 64, kMarginR = 16, kMarginT = 34, kMarginB = 46;
}  // namespace

SvgFigure::SvgFigure(double width, double height, std::string title)
    : width_(width), height_(height), title_(std::move(title)) {}

void SvgFigure::set_axes(double x_min, double x_max, double y_min, double y_max,
                         const std::string& x_label, const std::string& y_label) {
  x_min_ = x_min;
  x_max_ = x_max;
  y_min_ = y_min;
  y_max_ = y_max;
  x_label_ = x_label;
  y_label_ = y_label;
}

void SvgFigure::add_line_series(const std::string& name, const std::vector<double>& xs,
                                const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("SvgFigure: series size mismatch");
  series_.push_back({name, xs, ys, false});
}

void SvgFigure::add_scatter_series(const std::string& name, const std::vector<double>& xs,
                                   const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("SvgFigure: series size mismatch");
  series_.push_back({name, xs, ys, true});
}

void SvgFigure::add_heatmap(const std::vector<std::vector<double>>& grid, bool dark_is_small) {
  heat_ = grid;
  heat_dark_small_ = dark_is_small;
}

double SvgFigure::px(double x) const {
  double span = x_max_ - x_min_;
  if (span == 0) span = 1;
  return kMarginL + (x - x_min_) / span * (width_ - kMarginL - kMarginR);
}

double SvgFigure::py(double y) const {
  double span = y_max_ - y_min_;
  if (span == 0) span = 1;
  return height_ - kMarginB - (y - y_min_) / span * (height_ - kMarginT - kMarginB);
}

std::string SvgFigure::render() const {
  std::string s;
  char buf[256];
  auto emitf = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    s += buf;
  };
  emitf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
        "viewBox=\"0 0 %g %g\">\n",
        width_, height_, width_, height_);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  emitf("<text x=\"%g\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" "
        "text-anchor=\"middle\">%s</text>\n",
        width_ / 2, title_.c_str());

  if (!heat_.empty()) {
    double lo = heat_[0][0], hi = heat_[0][0];
    for (const auto& row : heat_)
      for (double v : row) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    double span = hi - lo;
    if (span == 0) span = 1;
    double cw = (width_ - kMarginL - kMarginR) / static_cast<double>(heat_[0].size());
    double ch = (height_ - kMarginT - kMarginB) / static_cast<double>(heat_.size());
    for (std::size_t r = 0; r < heat_.size(); ++r)
      for (std::size_t c = 0; c < heat_[r].size(); ++c) {
        double t = (heat_[r][c] - lo) / span;
        if (heat_dark_small_) t = 1.0 - t;
        int shade = static_cast<int>(std::lround(35 + 220 * (1.0 - t)));
        emitf("<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"rgb(%d,%d,%d)\"/>\n",
              kMarginL + cw * static_cast<double>(c), kMarginT + ch * static_cast<double>(r),
              cw + 0.5, ch + 0.5, shade, shade, shade);
      }
  }

  // axes
  emitf("<path d=\"M %g %g L %g %g L %g %g\" stroke=\"black\" fill=\"none\"/>\n", kMarginL,
        kMarginT, kMarginL, height_ - kMarginB, width_ - kMarginR, height_ - kMarginB);
  for (int i = 0; i <= 4; ++i) {
    double xv = x_min_ + (x_max_ - x_min_) * i / 4.0;
    double yv = y_min_ + (y_max_ - y_min_) * i / 4.0;
    emitf("<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"10\" "
          "text-anchor=\"middle\">%.3g</text>\n",
          px(xv), height_ - kMarginB + 14, xv);
    emitf("<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"10\" "
          "text-anchor=\"end\">%.3g</text>\n",
          kMarginL - 4, py(yv) + 3, yv);
  }
  emitf("<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">%s</text>\n",
        (kMarginL + width_ - kMarginR) / 2, height_ - 10, x_label_.c_str());
  emitf("<text x=\"14\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\" transform=\"rotate(-90 14 %g)\">%s</text>\n",
        (kMarginT + height_ - kMarginB) / 2, (kMarginT + height_ - kMarginB) / 2,
        y_label_.c_str());

  for (std::size_t si = 0; si < series_.size(); ++si) {
    const auto& ser = series_[si];
    const char* color = kPalette[si % 10];
    if (ser.scatter) {
      for (std::size_t i = 0; i < ser.xs.size(); ++i)
        emitf("<rect x=\"%g\" y=\"%g\" width=\"3\" height=\"3\" fill=\"%s\"/>\n",
              px(ser.xs[i]) - 1.5, py(ser.ys[i]) - 1.5, color);
    } else if (!ser.xs.empty()) {
      s += "<path d=\"";
      for (std::size_t i = 0; i < ser.xs.size(); ++i)
        emitf("%s %g %g ", i == 0 ? "M" : "L", px(ser.xs[i]), py(ser.ys[i]));
      emitf("\" stroke=\"%s\" stroke-width=\"1.5\" fill=\"none\"/>\n", color);
    }
    emitf("<rect x=\"%g\" y=\"%g\" width=\"10\" height=\"10\" fill=\"%s\"/>\n",
          kMarginL + 8, kMarginT + 6 + 16 * static_cast<double>(si), color);
    emitf("<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\">%s</text>\n",
          kMarginL + 22, kMarginT + 15 + 16 * static_cast<double>(si), ser.name.c_str());
  }
  s += "</svg>\n";
  return s;
}

void SvgFigure::write(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("SvgFigure: cannot open " + path);
  os << render();
}

}  // namespace dslab
