#include "topoframe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace topoframe {

namespace {

std::string header(double w, double h) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << " " << h << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  return s.str();
}

std::string grey(double v) {
  const int g = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(v, 0.0, 1.0))));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", g, g, g);
  return buf;
}

}  // namespace

std::string svg_density(std::span<const double> values, int nx, int ny, double h) {
  std::ostringstream s;
  s << header(nx * h, ny * h);
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < nx; ++c)
      s << "<rect x=\"" << c * h << "\" y=\"" << r * h << "\" width=\"" << h << "\" height=\"" << h
        << "\" fill=\"" << grey(values[r * nx + c]) << "\"/>\n";
  s << "</svg>\n";
  return s.str();
}

std::string svg_skeleton(const BinaryRaster& structure, const Skeleton& skeleton, double h) {
  const int w = structure.width, ht = structure.height;
  std::ostringstream s;
  s << header(w * h, ht * h);
  const auto cell = [&](int c, int r, const char* fill, const char* extra = "") {
    s << "<rect x=\"" << c * h << "\" y=\"" << r * h << "\" width=\"" << h << "\" height=\"" << h << "\" fill=\""
      << fill << "\"" << extra << "/>\n";
  };
  for (int r = 0; r < ht; ++r)
    for (int c = 0; c < w; ++c)
      if (structure.get(c, r)) cell(c, r, "#d0d0d0");
  for (int r = 0; r < ht; ++r)
    for (int c = 0; c < w; ++c) {
      const int i = skeleton.raster.index(c, r);
      if (!skeleton.raster.get(c, r)) continue;
      const PixelType t = skeleton.types[i];
      const char* fill = t == PixelType::End ? "#2ca02c" : t == PixelType::Joint ? "#ff7f0e" : "#000000";
      cell(c, r, fill, skeleton.raster.is_tagged(i) ? " stroke=\"#d62728\" stroke-width=\"1\"" : "");
    }
  s << "</svg>\n";
  return s.str();
}

std::string svg_frame(const FrameGraph& graph, double width, double height, const FrameResult* result) {
  double amax = 0.0;
  for (const auto& e : graph.edges) amax = std::max(amax, e.area);
  const double wmax = 0.02 * std::max(width, height);
  std::ostringstream s;
  s << header(width, height);
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto& ed = graph.edges[e];
    const auto& a = graph.nodes[ed.n1];
    const auto& b = graph.nodes[ed.n2];
    std::string color = "#404040";
    if (result) color = result->axial(e) >= 0.0 ? "#d62728" : "#1f77b4";
    const double sw = amax > 0 ? std::max(1.0, wmax * std::sqrt(ed.area / amax)) : 1.0;
    s << "<line x1=\"" << a.x << "\" y1=\"" << height - a.y << "\" x2=\"" << b.x << "\" y2=\"" << height - b.y
      << "\" stroke=\"" << color << "\" stroke-width=\"" << sw << "\" stroke-linecap=\"round\"><title>member "
      << e + 1 << "</title></line>\n";
  }
  for (const auto& n : graph.nodes) {
    const char* fill = n.is_support() ? "#000000" : n.loaded ? "#9467bd" : "#808080";
    s << "<circle cx=\"" << n.x << "\" cy=\"" << height - n.y << "\" r=\"" << 0.5 * wmax << "\" fill=\"" << fill
      << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace topoframe
