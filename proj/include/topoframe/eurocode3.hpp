#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topoframe/frame_fe.hpp"
#include "topoframe/graph.hpp"
#include "topoframe/problem.hpp"

namespace topoframe {

enum class SectionShape { CHS, SHS };

struct Section {
  std::string designation;
  SectionShape shape = SectionShape::CHS;
  double d = 0.0;  // outer diameter or width (mm)
  double t = 0.0;  // wall thickness (mm)
  double area = 0.0;
  double inertia = 0.0;
  double w_pl = 0.0;
  double w_el = 0.0;
  double radius_gyration = 0.0;
  double shear_area = 0.0;
  int section_class = 1;
};

inline double steel_epsilon(double fy) { return std::sqrt(235.0 / fy); }

/// Cross-section class 1..3 for the given steel; throws
/// Error("slender section rejected") for class 4.
int classify_section(SectionShape shape, double d, double t, double fy);

/// Geometric properties from the nominal dimensions (sharp corners for SHS).
Section section_properties(SectionShape shape, double d, double t, double fy);

struct SectionCatalog {
  std::vector<Section> sections;
};

/// Built-in CHS/SHS table.
SectionCatalog default_catalog(double fy);
/// CSV with columns designation, shape, d, t, A, I, w_pl, w_el, i.
SectionCatalog parse_catalog_csv(const std::string& text, double fy);
SectionCatalog load_catalog(const std::filesystem::path& path, double fy);
std::string default_catalog_csv();

struct SectionFilter {
  std::optional<SectionShape> shape;
  double wall = 0.0;  // 0: any wall thickness
};

/// Smallest-area section with A >= a_required; ties by designation.
/// Throws Error("catalog exhausted ...") when none qualifies.
const Section& select_section(double a_required, const SectionCatalog& catalog, const SectionFilter& filter = {});
const Section* find_section(const SectionCatalog& catalog, const std::string& designation);

/// N / (A fy), tension positive.
double tension_ratio(double n_ed, const Section& sec, double fy);

/// Flexural-buckling reduction factor for non-dimensional slenderness.
double buckling_reduction(double lambda_bar, double alpha);

struct BucklingResult {
  double sigma_f = 0.0;    // elastic flexural buckling stress
  double lambda_bar = 0.0;
  double phi = 0.0;
  double chi = 1.0;
  double n_b_rd = 0.0;
  double ratio = 0.0;
};

/// Compression member with effective length factor k (0.7 for fixed ends).
BucklingResult buckling_check(double n_ed, const Section& sec, double length, double youngs, double fy,
                              double alpha, double k = 0.7);

/// Critical wall thickness and diameter of a compression tube.
double minimum_wall_thickness(double n, double youngs);
double minimum_diameter(double n, double length, double youngs);

/// Local buckling stress 1.21 E t / d and average axial stress N / (pi d t).
double local_buckling_stress(const Section& sec, double youngs);
double average_axial_stress(double n, const Section& sec);

double shear_resistance(const Section& sec, double fy);
double shear_ratio(double v_ed, const Section& sec, double fy);

struct BendingResult {
  double m_c_rd = 0.0;
  double rho_v = 0.0;
  double fy_used = 0.0;
  double ratio = 0.0;
};
BendingResult bending_check(double m_ed, const Section& sec, double fy, double v_ed);

enum class AxialMode { Tension, Compression };
/// Tension: N/N_Rd + M/M_c,Rd. Compression: the larger of the two
/// interaction expressions with N_b,Rd and M_c,Rd.
double combined_ratio(double n_ed, double m_ed, double n_resistance, double m_resistance, AxialMode mode,
                      double k_yy = 1.0, double k_zy = 1.0);

struct DeflectionCheck {
  double deflection = 0.0;
  double limit = 0.0;
  bool pass = true;
};
DeflectionCheck deflection_check(const FrameResult& sls, double span, double divisor);

struct MemberChecks {
  int member = 0;
  std::string designation;
  double length = 0.0;
  double n_ed = 0.0;  // tension positive
  double v_ed = 0.0;
  double m_ed = 0.0;
  bool compression = false;
  double n_rd = 0.0;
  double n_b_rd = 0.0;
  double m_c_rd = 0.0;
  double v_pl_rd = 0.0;
  double axial_ratio = 0.0;
  double buckling_ratio = 0.0;  // 0 for tension members
  double bending_ratio = 0.0;
  double shear_ratio = 0.0;
  double combined_ratio = 0.0;
  double local_ratio = 0.0;     // sigma_s / sigma_L
  double slenderness = 0.0;     // L / i
  bool slender = false;         // L / i > 150
  std::string governing;
  bool pass = true;
};

struct DesignOptions {
  double fy = 355.0;
  double youngs = 2.1e5;
  double alpha = 0.21;
  double k_yy = 1.0;
  double k_zy = 1.0;
  double load_factor = 1.35;
  double deflection_divisor = 180.0;
  double span = 0.0;
  SectionFilter filter;
};

DesignOptions design_options(const DesignProblem& problem);

struct DesignReport {
  std::vector<MemberChecks> members;
  DeflectionCheck deflection;
  double fy = 0.0;
  double load_factor = 1.0;
  bool pass = true;
};

/// Checks one member given its ULS actions.
MemberChecks check_member(int member, const Section& sec, double length, double n_ed, double v_ed,
                          double m_ed, const DesignOptions& options);

/// Picks a catalog section for every member from its area.
FrameGraph assign_sections(const FrameGraph& graph, const SectionCatalog& catalog, const SectionFilter& filter);

/// Second moments and areas of the assigned sections.
void section_stiffness(const FrameGraph& graph, const SectionCatalog& catalog, std::vector<double>& areas,
                       std::vector<double>& inertias);

/// Verifies a frame whose members all carry a catalog section: ULS analysis
/// at the given loads, SLS at loads divided by the load factor.
DesignReport verify_frame(const FrameGraph& graph, const SectionCatalog& catalog, const DesignOptions& options);

std::string report_json(const DesignReport& report);
std::string report_markdown(const DesignReport& report);

}  // namespace topoframe
