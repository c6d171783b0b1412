#include "tgb/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tgb/errors.hpp"

namespace tgb {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string render_svg(const LinePlot& plot, int width, int height) {
  const double ml = 60, mr = 20, mt = 36, mb = 48;
  const double pw = width - ml - mr;
  const double ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : plot.series) {
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  // Pad the y range a little so flat series stay visible.
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const auto px = [&](double x) { return ml + pw * (x - xmin) / (xmax - xmin); };
  const auto py = [&](double y) { return mt + ph * (ymax - y) / (ymax - ymin); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
     << "font-size=\"14\">" << plot.title << "</text>\n";

  // Axes and gridlines.
  os << "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double gy = mt + ph * i / 4.0;
    os << "<line x1=\"" << ml << "\" y1=\"" << fmt(gy) << "\" x2=\""
       << ml + pw << "\" y2=\"" << fmt(gy) << "\"/>\n";
  }
  os << "</g>\n";
  os << "<g font-size=\"11\" fill=\"#333333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ymax - (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(mt + ph * i / 4.0 + 4)
       << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = xmin + (xmax - xmin) * i / 4.0;
    os << "<text x=\"" << fmt(ml + pw * i / 4.0) << "\" y=\""
       << height - mb + 18 << "\" text-anchor=\"middle\">" << fmt(v)
       << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
     << "\" text-anchor=\"middle\" font-size=\"12\">" << plot.x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << height / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << height / 2 << ")\">" << plot.y_label << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
     << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* color = kPalette[si % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : s.points)
      os << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
    os << "\"/>\n";
    for (const auto& [x, y] : s.points)
      os << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << ml + pw - 4 << "\" y=\"" << mt + 16 + 16 * si
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
       << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const LinePlot& plot, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << render_svg(plot);
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace tgb
