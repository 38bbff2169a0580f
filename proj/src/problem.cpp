#include "topoframe/problem.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace topoframe {

using nlohmann::json;

namespace {

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParseError("field '" + field + "': " + what);
}

double get_number(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number()) field_error(key, "expected a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) field_error(key, "expected an integer");
  return v.get<int>();
}

template <typename T, typename Getter>
void read_optional(const json& j, const std::string& key, T& out, Getter get) {
  if (j.contains(key)) out = get(j, key);
}

int read_pixel(const json& v, const std::string& field, int nx) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
    // a column past the edge would otherwise wrap onto the next row
    const int col = v[0].get<int>(), row = v[1].get<int>();
    if (col < 0 || col >= nx || row < 0) throw ValidationError(field + " [" + std::to_string(col) + ", " +
                                                               std::to_string(row) + "] outside the grid");
    return row * nx + col;
  }
  field_error(field, "expected a pixel index or [col, row]");
}

SupportDofs read_dofs(const json& v, const std::string& field) {
  if (!v.is_array()) field_error(field, "expected an array of \"x\", \"y\", \"rz\"");
  SupportDofs d;
  for (const auto& e : v) {
    if (!e.is_string()) field_error(field, "expected dof names");
    const auto s = e.get<std::string>();
    if (s == "x") d.x = true;
    else if (s == "y") d.y = true;
    else if (s == "rz") d.rz = true;
    else field_error(field, "unknown dof '" + s + "'");
  }
  return d;
}

json write_dofs(const SupportDofs& d) {
  json a = json::array();
  if (d.x) a.push_back("x");
  if (d.y) a.push_back("y");
  if (d.rz) a.push_back("rz");
  return a;
}

void check_units(const json& doc) {
  if (!doc.contains("units")) return;
  const json& u = doc.at("units");
  const auto expect = [&](const char* key, const char* unit) {
    if (u.contains(key) && u.at(key) != unit)
      throw ValidationError(std::string("units.") + key + " must be \"" + unit + "\"");
  };
  expect("length", "mm");
  expect("force", "N");
  expect("stress", "N/mm^2");
}

}  // namespace

DesignProblem default_parameters() { return DesignProblem{}; }

std::vector<int> DesignProblem::tagged_pixels() const {
  std::vector<int> tags;
  for (const auto& s : supports) {
    tags.push_back(s.pixel);
    if (s.to_pixel) tags.push_back(*s.to_pixel);
  }
  for (const auto& l : loads) tags.push_back(l.pixel);
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  return tags;
}

std::vector<std::pair<int, SupportDofs>> DesignProblem::support_pixels() const {
  std::vector<std::pair<int, SupportDofs>> out;
  for (const auto& s : supports) {
    if (!s.to_pixel) {
      out.emplace_back(s.pixel, s.dofs);
      continue;
    }
    const int c0 = s.pixel % nx, r0 = s.pixel / nx;
    const int c1 = *s.to_pixel % nx, r1 = *s.to_pixel / nx;
    const int dc = (c1 > c0) - (c1 < c0), dr = (r1 > r0) - (r1 < r0);
    for (int c = c0, r = r0;; c += dc, r += dr) {
      out.emplace_back(r * nx + c, s.dofs);
      if (c == c1 && r == r1) break;
    }
  }
  return out;
}

void validate(const DesignProblem& p) {
  const auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (p.nx < 2 || p.ny < 2) fail("grid size out of range (nx, ny >= 2)");
  if (!(p.h > 0)) fail("element size h must be positive");
  if (!(p.thickness > 0)) fail("thickness must be positive");
  if (!(p.volume_fraction > 0 && p.volume_fraction <= 1)) fail("volume_fraction out of range");
  if (!(p.penalization >= 1)) fail("penalization out of range (p >= 1)");
  if (!(p.filter_radius > 0)) fail("filter_radius must be positive");
  if (!(p.merge_ratio >= 0 && p.merge_ratio < 0.5)) fail("merge_ratio out of range [0, 0.5)");
  if (!(p.area_bounds.min > 0 && p.area_bounds.min < p.area_bounds.max))
    fail("area_bounds out of range (0 < min < max)");
  if (!(p.youngs_void > 0 && p.youngs_void < p.youngs_solid))
    fail("youngs_void out of range (0 < E_min < E)");
  if (!(p.poisson > 0 && p.poisson < 0.5)) fail("poisson out of range (0, 0.5)");
  if (!(p.yield_fy > 0)) fail("yield_fy must be positive");
  if (p.max_iter_top < 1) fail("max_iter_top must be at least 1");
  if (!(p.angle_limit >= 0 && p.angle_limit < 90)) fail("angle_limit out of range [0, 90)");
  if (!(p.frame_tolerances.size > 0 && p.frame_tolerances.layout > 0 &&
        p.frame_tolerances.frame > 0))
    fail("frame_tolerances must be positive");
  if (!(p.load_factor_uls >= 1)) fail("load_factor_uls out of range (>= 1)");
  if (!(p.deflection_limit_divisor > 0)) fail("deflection_limit_divisor must be positive");
  if (p.threshold_mode.kind == ThresholdMode::Kind::Fixed &&
      !(p.threshold_mode.eta > 0 && p.threshold_mode.eta < 1))
    fail("threshold level out of range (0, 1)");
  if (p.max_iter_mma < 1 || p.max_stages < 1) fail("iteration caps must be positive");
  if (!(p.layout_box >= 0)) fail("layout_box must be non-negative");
  if (!(p.layout_move > 0 && p.layout_move <= 1)) fail("layout_move out of range (0, 1]");
  if (p.supports.empty()) fail("at least one support is required");

  const int npix = p.nx * p.ny;
  const auto inside = [&](int pix) { return pix >= 0 && pix < npix; };
  for (const auto& s : p.supports) {
    if (!inside(s.pixel)) fail("support pixel outside the grid");
    if (!s.dofs.any()) fail("support constrains no dof");
    if (s.to_pixel) {
      if (!inside(*s.to_pixel)) fail("support pixel outside the grid");
      if (s.pixel % p.nx != *s.to_pixel % p.nx && s.pixel / p.nx != *s.to_pixel / p.nx)
        fail("support run must lie on one row or one column");
    }
  }
  for (const auto& l : p.loads)
    if (!inside(l.pixel)) fail("load pixel outside the grid");
}

DesignProblem parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed problem document at " + line_context(text, e.byte) + ": " +
                     e.what());
  }
  if (!doc.is_object()) throw ParseError("problem document must be a JSON object");
  check_units(doc);

  DesignProblem p = default_parameters();
  try {
    for (const char* key : {"nx", "ny", "supports", "loads"})
      if (!doc.contains(key)) field_error(key, "missing required field");
    p.nx = get_int(doc, "nx");
    p.ny = get_int(doc, "ny");
    read_optional(doc, "h", p.h, get_number);
    read_optional(doc, "thickness", p.thickness, get_number);
    read_optional(doc, "youngs_solid", p.youngs_solid, get_number);
    read_optional(doc, "youngs_void", p.youngs_void, get_number);
    read_optional(doc, "poisson", p.poisson, get_number);
    read_optional(doc, "yield_fy", p.yield_fy, get_number);
    read_optional(doc, "volume_fraction", p.volume_fraction, get_number);
    read_optional(doc, "penalization", p.penalization, get_number);
    read_optional(doc, "filter_radius", p.filter_radius, get_number);
    read_optional(doc, "max_iter_top", p.max_iter_top, get_int);
    read_optional(doc, "merge_ratio", p.merge_ratio, get_number);
    read_optional(doc, "angle_limit", p.angle_limit, get_number);
    read_optional(doc, "load_factor_uls", p.load_factor_uls, get_number);
    read_optional(doc, "deflection_limit_divisor", p.deflection_limit_divisor, get_number);

    const json& supports = doc.at("supports");
    if (!supports.is_array()) field_error("supports", "expected an array");
    for (const auto& s : supports) {
      Support sup;
      if (!s.contains("pixel") || !s.contains("dofs"))
        field_error("supports", "each entry needs 'pixel' and 'dofs'");
      sup.pixel = read_pixel(s.at("pixel"), "supports.pixel", p.nx);
      if (s.contains("to")) sup.to_pixel = read_pixel(s.at("to"), "supports.to", p.nx);
      sup.dofs = read_dofs(s.at("dofs"), "supports.dofs");
      p.supports.push_back(sup);
    }
    const json& loads = doc.at("loads");
    if (!loads.is_array()) field_error("loads", "expected an array");
    for (const auto& l : loads) {
      if (!l.contains("pixel")) field_error("loads", "each entry needs 'pixel'");
      PointLoad load;
      load.pixel = read_pixel(l.at("pixel"), "loads.pixel", p.nx);
      read_optional(l, "fx", load.fx, get_number);
      read_optional(l, "fy", load.fy, get_number);
      p.loads.push_back(load);
    }

    if (doc.contains("threshold_mode")) {
      const json& t = doc.at("threshold_mode");
      if (t.is_number()) {
        p.threshold_mode = {ThresholdMode::Kind::Fixed, t.get<double>()};
      } else if (t == "otsu") {
        p.threshold_mode.kind = ThresholdMode::Kind::Otsu;
      } else if (t == "volume") {
        p.threshold_mode.kind = ThresholdMode::Kind::Volume;
      } else {
        field_error("threshold_mode", "expected a level, \"otsu\" or \"volume\"");
      }
    }
    if (doc.contains("frame_tolerances")) {
      const json& t = doc.at("frame_tolerances");
      read_optional(t, "size", p.frame_tolerances.size, get_number);
      read_optional(t, "layout", p.frame_tolerances.layout, get_number);
      read_optional(t, "frame", p.frame_tolerances.frame, get_number);
    }
    if (doc.contains("area_bounds")) {
      const json& a = doc.at("area_bounds");
      read_optional(a, "min", p.area_bounds.min, get_number);
      read_optional(a, "max", p.area_bounds.max, get_number);
    }
    if (doc.contains("options")) {
      const json& o = doc.at("options");
      if (o.contains("topopt_method")) {
        const auto m = o.at("topopt_method");
        if (m == "oc") p.topopt_method = TopOptMethod::OptimalityCriteria;
        else if (m == "mma") p.topopt_method = TopOptMethod::Mma;
        else field_error("options.topopt_method", "expected \"oc\" or \"mma\"");
      }
      read_optional(o, "max_iter_mma", p.max_iter_mma, get_int);
      read_optional(o, "max_stages", p.max_stages, get_int);
      read_optional(o, "layout_box", p.layout_box, get_number);
      read_optional(o, "layout_move", p.layout_move, get_number);
      if (o.contains("section_shape")) p.section_shape = o.at("section_shape").get<std::string>();
      read_optional(o, "section_wall", p.section_wall, get_number);
      read_optional(o, "imperfection_alpha", p.imperfection_alpha, get_number);
      read_optional(o, "k_yy", p.k_yy, get_number);
      read_optional(o, "k_zy", p.k_zy, get_number);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem document: ") + e.what());
  }

  validate(p);
  return p;
}

DesignProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open problem file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_problem(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_problem(const DesignProblem& p) {
  json doc;
  doc["units"] = {{"length", "mm"}, {"force", "N"}, {"stress", "N/mm^2"}};
  doc["nx"] = p.nx;
  doc["ny"] = p.ny;
  doc["h"] = p.h;
  doc["thickness"] = p.thickness;
  doc["youngs_solid"] = p.youngs_solid;
  doc["youngs_void"] = p.youngs_void;
  doc["poisson"] = p.poisson;
  doc["yield_fy"] = p.yield_fy;
  doc["volume_fraction"] = p.volume_fraction;
  doc["penalization"] = p.penalization;
  doc["filter_radius"] = p.filter_radius;
  json supports = json::array();
  for (const auto& s : p.supports) {
    json e = {{"pixel", s.pixel}, {"dofs", write_dofs(s.dofs)}};
    if (s.to_pixel) e["to"] = *s.to_pixel;
    supports.push_back(e);
  }
  doc["supports"] = supports;
  json loads = json::array();
  for (const auto& l : p.loads) loads.push_back({{"pixel", l.pixel}, {"fx", l.fx}, {"fy", l.fy}});
  doc["loads"] = loads;
  doc["max_iter_top"] = p.max_iter_top;
  switch (p.threshold_mode.kind) {
    case ThresholdMode::Kind::Fixed: doc["threshold_mode"] = p.threshold_mode.eta; break;
    case ThresholdMode::Kind::Otsu: doc["threshold_mode"] = "otsu"; break;
    case ThresholdMode::Kind::Volume: doc["threshold_mode"] = "volume"; break;
  }
  doc["merge_ratio"] = p.merge_ratio;
  doc["angle_limit"] = p.angle_limit;
  doc["frame_tolerances"] = {{"size", p.frame_tolerances.size},
                             {"layout", p.frame_tolerances.layout},
                             {"frame", p.frame_tolerances.frame}};
  doc["area_bounds"] = {{"min", p.area_bounds.min}, {"max", p.area_bounds.max}};
  doc["load_factor_uls"] = p.load_factor_uls;
  doc["deflection_limit_divisor"] = p.deflection_limit_divisor;
  doc["options"] = {
      {"topopt_method", p.topopt_method == TopOptMethod::Mma ? "mma" : "oc"},
      {"max_iter_mma", p.max_iter_mma},
      {"max_stages", p.max_stages},
      {"layout_box", p.layout_box},
      {"layout_move", p.layout_move},
      {"section_shape", p.section_shape},
      {"section_wall", p.section_wall},
      {"imperfection_alpha", p.imperfection_alpha},
      {"k_yy", p.k_yy},
      {"k_zy", p.k_zy},
  };
  return doc.dump(2) + "\n";
}

void save_problem(const DesignProblem& problem, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_problem(problem);
}

}  // namespace topoframe
