#include "topoframe/eurocode3.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "topoframe/error.hpp"

namespace topoframe {

namespace {

constexpr double kPi = std::numbers::pi;

const char* kCatalogCsv = R"(designation,shape,d,t,A,I,w_pl,w_el,i
CHS 42.4x4,CHS,42.4,4,482.55,89908.5,5919.6,4241.0,13.650
CHS 48.3x4,CHS,48.3,4,556.69,137675.8,7871.3,5700.9,15.726
CHS 60.3x4,CHS,60.3,4,707.49,281729.1,12700.1,9344.3,19.955
CHS 76.1x4,CHS,76.1,4,906.04,590555.0,20815.0,15520.5,25.530
CHS 88.9x4,CHS,88.9,4,1066.88,963398.4,28853.4,21673.8,30.050
CHS 101.6x4,CHS,101.6,4,1226.48,1462844.6,38124.4,28796.2,34.536
CHS 114.3x4,CHS,114.3,4,1386.07,2110654.7,48685.7,36931.8,39.023
CHS 139.7x4,CHS,139.7,4,1705.26,3928589.1,73679.3,56243.2,47.998
CHS 168.3x4,CHS,168.3,4,2064.65,6970916.9,107999.3,82839.2,58.106
SHS 50x6.3,SHS,50,6.3,1101.24,357789.2,18171.6,14311.6,18.025
SHS 60x6.3,SHS,60,6.3,1353.24,659339.1,27375.9,21978.0,22.073
)";

SectionShape parse_shape(const std::string& s) {
  if (s == "CHS") return SectionShape::CHS;
  if (s == "SHS") return SectionShape::SHS;
  throw ParseError("unknown section shape '" + s + "'");
}

double shear_area_of(SectionShape shape, double area) {
  return shape == SectionShape::CHS ? 2.0 * area / kPi : area / 2.0;
}

std::string fmt(double v, int digits = 2) {
  if (!std::isfinite(v)) return "inf";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

int classify_section(SectionShape shape, double d, double t, double fy) {
  const double eps = steel_epsilon(fy);
  if (shape == SectionShape::CHS) {
    const double r = d / t, e2 = eps * eps;
    if (r <= 50.0 * e2) return 1;
    if (r <= 70.0 * e2) return 2;
    if (r <= 90.0 * e2) return 3;
  } else {
    const double r = (d - 3.0 * t) / t;
    if (r <= 33.0 * eps) return 1;
    if (r <= 38.0 * eps) return 2;
    if (r <= 42.0 * eps) return 3;
  }
  throw Error("slender section rejected (class 4)");
}

Section section_properties(SectionShape shape, double d, double t, double fy) {
  if (!(t > 0 && 2.0 * t < d)) throw ValidationError("section dimensions must satisfy 0 < 2t < d");
  Section s;
  s.shape = shape;
  s.d = d;
  s.t = t;
  const double di = d - 2.0 * t;
  std::ostringstream name;
  if (shape == SectionShape::CHS) {
    s.area = kPi / 4.0 * (d * d - di * di);
    s.inertia = kPi / 64.0 * (std::pow(d, 4) - std::pow(di, 4));
    s.w_el = 2.0 * s.inertia / d;
    s.w_pl = (std::pow(d, 3) - std::pow(di, 3)) / 6.0;
    name << "CHS ";
  } else {
    s.area = d * d - di * di;
    s.inertia = (std::pow(d, 4) - std::pow(di, 4)) / 12.0;
    s.w_el = 2.0 * s.inertia / d;
    s.w_pl = (std::pow(d, 3) - std::pow(di, 3)) / 4.0;
    name << "SHS ";
  }
  name << d << "x" << t;
  s.designation = name.str();
  s.radius_gyration = std::sqrt(s.inertia / s.area);
  s.shear_area = shear_area_of(shape, s.area);
  s.section_class = classify_section(shape, d, t, fy);
  return s;
}

std::string default_catalog_csv() { return kCatalogCsv; }

SectionCatalog parse_catalog_csv(const std::string& text, double fy) {
  SectionCatalog cat;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty() && cells[0] == "designation") continue;
    if (cells.size() != 9)
      throw ParseError("catalog line " + std::to_string(lineno) + ": expected 9 columns, found " +
                       std::to_string(cells.size()));
    Section s;
    try {
      s.designation = cells[0];
      s.shape = parse_shape(cells[1]);
      s.d = std::stod(cells[2]);
      s.t = std::stod(cells[3]);
      s.area = std::stod(cells[4]);
      s.inertia = std::stod(cells[5]);
      s.w_pl = std::stod(cells[6]);
      s.w_el = std::stod(cells[7]);
      s.radius_gyration = std::stod(cells[8]);
    } catch (const std::invalid_argument&) {
      throw ParseError("catalog line " + std::to_string(lineno) + ": bad number");
    }
    if (!(s.area > 0 && s.inertia > 0 && s.w_pl > 0 && s.w_el > 0 && s.radius_gyration > 0))
      throw ParseError("catalog line " + std::to_string(lineno) + ": properties must be positive");
    s.shear_area = shear_area_of(s.shape, s.area);
    try {
      s.section_class = classify_section(s.shape, s.d, s.t, fy);
    } catch (const Error& e) {
      throw Error(s.designation + ": " + e.what());
    }
    cat.sections.push_back(s);
  }
  if (cat.sections.empty()) throw ParseError("catalog holds no sections");
  return cat;
}

SectionCatalog default_catalog(double fy) { return parse_catalog_csv(kCatalogCsv, fy); }

SectionCatalog load_catalog(const std::filesystem::path& path, double fy) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read catalog " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_catalog_csv(ss.str(), fy);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

const Section& select_section(double a_required, const SectionCatalog& catalog, const SectionFilter& filter) {
  const Section* best = nullptr;
  for (const auto& s : catalog.sections) {
    if (filter.shape && s.shape != *filter.shape) continue;
    if (filter.wall > 0 && std::abs(s.t - filter.wall) > 1e-9) continue;
    if (s.area < a_required) continue;
    if (!best || s.area < best->area || (s.area == best->area && s.designation < best->designation)) best = &s;
  }
  if (!best) throw Error("catalog exhausted: no section with area >= " + fmt(a_required) + " mm^2");
  return *best;
}

const Section* find_section(const SectionCatalog& catalog, const std::string& designation) {
  for (const auto& s : catalog.sections)
    if (s.designation == designation) return &s;
  return nullptr;
}

double tension_ratio(double n_ed, const Section& sec, double fy) { return std::abs(n_ed) / (sec.area * fy); }

double buckling_reduction(double lambda_bar, double alpha) {
  const double phi = 0.5 * (1.0 + alpha * (lambda_bar - 0.2) + lambda_bar * lambda_bar);
  const double disc = phi * phi - lambda_bar * lambda_bar;
  if (disc < 0) throw Error("internal: negative discriminant in buckling reduction");
  return std::min(1.0, 1.0 / (phi + std::sqrt(disc)));
}

BucklingResult buckling_check(double n_ed, const Section& sec, double length, double youngs, double fy,
                              double alpha, double k) {
  BucklingResult b;
  const double le = k * length;
  b.sigma_f = kPi * kPi * youngs * sec.inertia / (sec.area * le * le);
  b.lambda_bar = std::sqrt(fy / b.sigma_f);
  b.phi = 0.5 * (1.0 + alpha * (b.lambda_bar - 0.2) + b.lambda_bar * b.lambda_bar);
  b.chi = buckling_reduction(b.lambda_bar, alpha);
  b.n_b_rd = b.chi * sec.area * fy;
  b.ratio = std::abs(n_ed) / b.n_b_rd;
  return b;
}

double minimum_wall_thickness(double n, double youngs) { return 0.513 * std::sqrt(n / youngs); }

double minimum_diameter(double n, double length, double youngs) {
  return 0.627 * std::pow(n * std::pow(length, 4) / youngs, 1.0 / 6.0);
}

double local_buckling_stress(const Section& sec, double youngs) { return 1.21 * youngs * sec.t / sec.d; }

double average_axial_stress(double n, const Section& sec) { return std::abs(n) / (kPi * sec.d * sec.t); }

double shear_resistance(const Section& sec, double fy) { return sec.shear_area * fy / std::sqrt(3.0); }

double shear_ratio(double v_ed, const Section& sec, double fy) {
  return std::abs(v_ed) / shear_resistance(sec, fy);
}

BendingResult bending_check(double m_ed, const Section& sec, double fy, double v_ed) {
  BendingResult b;
  const double vpl = shear_resistance(sec, fy);
  b.fy_used = fy;
  if (std::abs(v_ed) > 0.5 * vpl) {
    b.rho_v = std::pow(2.0 * std::abs(v_ed) / vpl - 1.0, 2);
    b.fy_used = std::max(0.0, (1.0 - b.rho_v) * fy);
  }
  const double w = sec.section_class <= 2 ? sec.w_pl : sec.w_el;
  b.m_c_rd = w * b.fy_used;
  const double m = std::abs(m_ed);
  if (m == 0.0) b.ratio = 0.0;
  else b.ratio = b.m_c_rd > 0 ? m / b.m_c_rd : std::numeric_limits<double>::infinity();
  return b;
}

double combined_ratio(double n_ed, double m_ed, double n_resistance, double m_resistance, AxialMode mode,
                      double k_yy, double k_zy) {
  const double n = std::abs(n_ed), m = std::abs(m_ed);
  const double nr = n == 0.0 ? 0.0 : n / n_resistance;
  const double mr = m == 0.0 ? 0.0 : (m_resistance > 0 ? m / m_resistance : std::numeric_limits<double>::infinity());
  if (mode == AxialMode::Tension) return nr + mr;
  return std::max(nr + k_yy * mr, nr + k_zy * mr);
}

DeflectionCheck deflection_check(const FrameResult& sls, double span, double divisor) {
  DeflectionCheck d;
  d.deflection = sls.max_deflection();
  d.limit = span / divisor;
  d.pass = d.deflection <= d.limit;
  return d;
}

DesignOptions design_options(const DesignProblem& p) {
  DesignOptions o;
  o.fy = p.yield_fy;
  o.youngs = p.youngs_solid;
  o.alpha = p.imperfection_alpha;
  o.k_yy = p.k_yy;
  o.k_zy = p.k_zy;
  o.load_factor = p.load_factor_uls;
  o.deflection_divisor = p.deflection_limit_divisor;
  o.span = p.width();
  if (p.section_shape == "CHS") o.filter.shape = SectionShape::CHS;
  else if (p.section_shape == "SHS") o.filter.shape = SectionShape::SHS;
  o.filter.wall = p.section_wall;
  return o;
}

MemberChecks check_member(int member, const Section& sec, double length, double n_ed, double v_ed, double m_ed,
                          const DesignOptions& o) {
  MemberChecks c;
  c.member = member;
  c.designation = sec.designation;
  c.length = length;
  c.n_ed = n_ed;
  c.v_ed = std::abs(v_ed);
  c.m_ed = std::abs(m_ed);
  c.compression = n_ed < 0;
  c.n_rd = sec.area * o.fy;
  c.axial_ratio = tension_ratio(n_ed, sec, o.fy);
  c.v_pl_rd = shear_resistance(sec, o.fy);
  c.shear_ratio = shear_ratio(v_ed, sec, o.fy);
  const auto bend = bending_check(m_ed, sec, o.fy, v_ed);
  c.m_c_rd = bend.m_c_rd;
  c.bending_ratio = bend.ratio;
  if (c.compression) {
    const auto b = buckling_check(n_ed, sec, length, o.youngs, o.fy, o.alpha);
    c.n_b_rd = b.n_b_rd;
    c.buckling_ratio = b.ratio;
    c.combined_ratio = combined_ratio(n_ed, m_ed, b.n_b_rd, bend.m_c_rd, AxialMode::Compression, o.k_yy, o.k_zy);
    if (sec.shape == SectionShape::CHS) c.local_ratio = average_axial_stress(n_ed, sec) / local_buckling_stress(sec, o.youngs);
  } else {
    c.combined_ratio = combined_ratio(n_ed, m_ed, c.n_rd, bend.m_c_rd, AxialMode::Tension);
  }
  c.slenderness = length / sec.radius_gyration;
  c.slender = c.slenderness > 150.0;

  const std::pair<const char*, double> modes[] = {{"axial", c.axial_ratio},     {"buckling", c.buckling_ratio},
                                                  {"bending", c.bending_ratio}, {"shear", c.shear_ratio},
                                                  {"axial+bending", c.combined_ratio}, {"local buckling", c.local_ratio}};
  double worst = -1.0;
  for (const auto& [name, r] : modes) {
    if (r > worst) {
      worst = r;
      c.governing = name;
    }
  }
  c.pass = worst <= 1.0;
  return c;
}

FrameGraph assign_sections(const FrameGraph& graph, const SectionCatalog& catalog, const SectionFilter& filter) {
  FrameGraph g = graph;
  for (auto& e : g.edges) {
    const Section& s = select_section(e.area, catalog, filter);
    e.section = s.designation;
  }
  return g;
}

void section_stiffness(const FrameGraph& graph, const SectionCatalog& catalog, std::vector<double>& areas,
                       std::vector<double>& inertias) {
  areas.clear();
  inertias.clear();
  for (int e = 0; e < graph.num_edges(); ++e) {
    const Section* s = find_section(catalog, graph.edges[e].section);
    if (!s)
      throw Error("member " + std::to_string(e + 1) + ": section '" + graph.edges[e].section +
                  "' not found in the catalog");
    areas.push_back(s->area);
    inertias.push_back(s->inertia);
  }
}

DesignReport verify_frame(const FrameGraph& graph, const SectionCatalog& catalog, const DesignOptions& o) {
  std::vector<double> areas, inertias;
  section_stiffness(graph, catalog, areas, inertias);
  const FrameResult uls = solve_frame(graph, areas, o.youngs, inertias, 1.0);
  const FrameResult sls = solve_frame(graph, areas, o.youngs, inertias, 1.0 / o.load_factor);

  DesignReport rep;
  rep.fy = o.fy;
  rep.load_factor = o.load_factor;
  for (int e = 0; e < graph.num_edges(); ++e) {
    const Section& s = *find_section(catalog, graph.edges[e].section);
    rep.members.push_back(check_member(e + 1, s, graph.length(e), uls.axial(e), uls.max_shear(e), uls.max_moment(e), o));
  }
  const double span = o.span > 0 ? o.span : 0.0;
  rep.deflection = deflection_check(sls, span, o.deflection_divisor);
  rep.pass = rep.deflection.pass;
  for (const auto& m : rep.members) rep.pass = rep.pass && m.pass;
  return rep;
}

std::string report_json(const DesignReport& r) {
  using nlohmann::json;
  const auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json("inf"); };
  json doc;
  doc["fy"] = r.fy;
  doc["load_factor_uls"] = r.load_factor;
  doc["pass"] = r.pass;
  doc["deflection"] = {{"sls_max", r.deflection.deflection}, {"limit", r.deflection.limit}, {"pass", r.deflection.pass}};
  json members = json::array();
  for (const auto& m : r.members) {
    members.push_back({{"member", m.member},
                       {"section", m.designation},
                       {"length", m.length},
                       {"N_Ed", m.n_ed},
                       {"V_Ed", m.v_ed},
                       {"M_Ed", m.m_ed},
                       {"compression", m.compression},
                       {"N_Rd", m.n_rd},
                       {"N_b_Rd", m.n_b_rd},
                       {"M_c_Rd", num(m.m_c_rd)},
                       {"V_pl_Rd", m.v_pl_rd},
                       {"axial", m.axial_ratio},
                       {"buckling", m.buckling_ratio},
                       {"bending", num(m.bending_ratio)},
                       {"shear", m.shear_ratio},
                       {"axial_bending", num(m.combined_ratio)},
                       {"local_buckling", m.local_ratio},
                       {"slenderness", m.slenderness},
                       {"slender", m.slender},
                       {"governing", m.governing},
                       {"pass", m.pass}});
  }
  doc["members"] = members;
  return doc.dump(2) + "\n";
}

std::string report_markdown(const DesignReport& r) {
  std::ostringstream out;
  out << "# Design check report\n\n";
  out << "f_y = " << fmt(r.fy, 0) << " N/mm^2, ULS load factor " << fmt(r.load_factor) << "\n\n";
  out << "| Member | Section | Axial | Buckling | Bending | Shear | Axial + Bending | Remarks |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& m : r.members) {
    std::string remark = m.pass ? "OK" : "FAIL (" + m.governing + ")";
    if (m.slender) remark += ", slender (L/i = " + fmt(m.slenderness, 0) + ")";
    out << "| " << m.member << " | " << m.designation << " | " << fmt(m.axial_ratio) << (m.compression ? " (C)" : "")
        << " | " << (m.compression ? fmt(m.buckling_ratio) : std::string("-")) << " | " << fmt(m.bending_ratio) << " | "
        << fmt(m.shear_ratio) << " | " << fmt(m.combined_ratio) << " | " << remark << " |\n";
  }
  out << "\nSLS deflection " << fmt(r.deflection.deflection) << " mm, limit " << fmt(r.deflection.limit) << " mm: "
      << (r.deflection.pass ? "OK" : "FAIL") << "\n\n";
  out << "Overall: " << (r.pass ? "PASS" : "FAIL") << "\n";
  return out.str();
}

}  // namespace topoframe
