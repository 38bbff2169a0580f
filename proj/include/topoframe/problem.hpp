#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topoframe/error.hpp"

namespace topoframe {

// Units throughout: lengths mm, forces N, stresses N/mm^2.

/// Degrees of freedom fixed by a support. `rz` only matters for frames.
struct SupportDofs {
  bool x = false;
  bool y = false;
  bool rz = false;

  bool any() const { return x || y || rz; }
  friend bool operator==(const SupportDofs&, const SupportDofs&) = default;
};

/// A support attached to one pixel, or to a straight run of pixels from
/// `pixel` to `to_pixel` (same row or same column). A run constrains the
/// continuum along the whole run but only its two end pixels are tagged.
struct Support {
  int pixel = 0;
  std::optional<int> to_pixel;
  SupportDofs dofs;

  friend bool operator==(const Support&, const Support&) = default;
};

/// Point load in Cartesian components (y upward).
struct PointLoad {
  int pixel = 0;
  double fx = 0.0;
  double fy = 0.0;

  friend bool operator==(const PointLoad&, const PointLoad&) = default;
};

struct ThresholdMode {
  enum class Kind { Fixed, Otsu, Volume };
  Kind kind = Kind::Fixed;
  double eta = 0.5;  // used by Kind::Fixed

  friend bool operator==(const ThresholdMode&, const ThresholdMode&) = default;
};

struct FrameTolerances {
  double size = 1e-4;
  double layout = 1e-4;
  double frame = 1e-4;

  friend bool operator==(const FrameTolerances&, const FrameTolerances&) = default;
};

struct AreaBounds {
  double min = 78.5;
  double max = 31416.0;

  friend bool operator==(const AreaBounds&, const AreaBounds&) = default;
};

enum class TopOptMethod { OptimalityCriteria, Mma };

struct DesignProblem {
  int nx = 0;
  int ny = 0;
  double h = 10.0;
  double thickness = 10.0;
  double youngs_solid = 2.1e5;
  double youngs_void = 1e-9;
  double poisson = 0.3;
  double yield_fy = 355.0;
  double volume_fraction = 0.5;
  double penalization = 3.0;
  double filter_radius = 1.2;
  std::vector<Support> supports;
  std::vector<PointLoad> loads;
  int max_iter_top = 200;
  ThresholdMode threshold_mode;
  double merge_ratio = 0.1;
  double angle_limit = 10.0;
  FrameTolerances frame_tolerances;
  AreaBounds area_bounds;
  double load_factor_uls = 1.35;
  double deflection_limit_divisor = 180.0;

  // Optional knobs; defaults reproduce the reference workflow.
  TopOptMethod topopt_method = TopOptMethod::OptimalityCriteria;
  int max_iter_mma = 20;
  int max_stages = 50;
  double layout_box = 0.0;  // 0: whole domain, else per-node half-width (mm)
  double layout_move = 0.05;  // MMA move limit, fraction of the bound range
  std::string section_shape = "CHS";
  double section_wall = 4.0;  // mm; 0 disables the wall-thickness filter
  double imperfection_alpha = 0.21;
  double k_yy = 1.0;
  double k_zy = 1.0;

  double width() const { return nx * h; }
  double height() const { return ny * h; }
  double domain_volume() const { return width() * height() * thickness; }
  double volume_budget() const { return volume_fraction * domain_volume(); }
  int pixel_index(int col, int row) const { return row * nx + col; }

  /// Pixels tagged as non-removable for skeletonization (sorted, unique).
  std::vector<int> tagged_pixels() const;
  /// Pixels constrained in the continuum model (run supports expanded).
  std::vector<std::pair<int, SupportDofs>> support_pixels() const;

  friend bool operator==(const DesignProblem&, const DesignProblem&) = default;
};

/// Reference defaults for every optional parameter. Grid size, supports and
/// loads are left empty.
DesignProblem default_parameters();

/// Throws ValidationError naming the first violated invariant.
void validate(const DesignProblem& problem);

DesignProblem parse_problem(const std::string& text);
DesignProblem load_problem(const std::filesystem::path& path);
std::string serialize_problem(const DesignProblem& problem);
void save_problem(const DesignProblem& problem, const std::filesystem::path& path);

}  // namespace topoframe
