#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace dslab {

// deterministic CSV emission: fixed 17-significant-digit doubles, LF endings
std::string format_double(double v);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Minimal SVG emitter (paths, rects, text only). Enough for per-lookup
// accuracy curves, probe heatmaps and scatter plots.
class SvgFigure {
 public:
  SvgFigure(double width, double height, std::string title);

  // data-space axes mapped into the plot area
  void set_axes(double x_min, double x_max, double y_min, double y_max,
                const std::string& x_label, const std::string& y_label);
  void add_line_series(const std::string& name, const std::vector<double>& xs,
                       const std::vector<double>& ys);
  void add_scatter_series(const std::string& name, const std::vector<double>& xs,
                          const std::vector<double>& ys);
  // row-major grid rendered as shaded cells (dark = small when invert set)
  void add_heatmap(const std::vector<std::vector<double>>& grid, bool dark_is_small);

  void write(const std::string& path) const;
  std::string render() const;

 private:
  double width_, height_;
  std::string title_;
  double x_min_ = 0, x_max_ = 1, y_min_ = 0, y_max_ = 1;
  std::string x_label_, y_label_;
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
    bool scatter = false;
  };
  std::vector<Series> series_;
  std::vector<std::vector<double>> heat_;
  bool heat_dark_small_ = true;

  double px(double x) const;
  double py(double y) const;
};

}  // namespace dslab
