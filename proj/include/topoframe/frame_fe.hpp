#pragma once

#include <Eigen/Dense>
#include <array>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "topoframe/graph.hpp"

namespace topoframe {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Second moment of a solid circle of area A: A^2 / (4 pi).
inline double solid_circle_inertia(double area) { return area * area / (4.0 * std::numbers::pi); }
inline double solid_circle_inertia_slope(double area) { return area / (2.0 * std::numbers::pi); }

/// Local stiffness of a plane frame member, DOFs (u1, v1, th1, u2, v2, th2).
/// Linear in (A, I) jointly.
Matrix6d local_stiffness(double e, double area, double inertia, double length);
/// d(local_stiffness)/dL at fixed E, A, I.
Matrix6d local_stiffness_length_derivative(double e, double area, double inertia, double length);

/// Block rotation from global to local axes: u_local = T u_global.
Matrix6d transformation(double c, double s);

struct MemberGeometry {
  double length = 0.0;
  double c = 1.0;
  double s = 0.0;
};
/// Throws Error("collapsed member") when the member has (nearly) zero length.
MemberGeometry member_geometry(const FrameGraph& graph, int edge);

struct FrameResult {
  Eigen::VectorXd u;          // per node (ux, uy, rz)
  Eigen::VectorXd load;       // applied nodal loads, same layout
  Eigen::VectorXd reactions;  // support reactions, same layout
  std::vector<Vector6d> end_forces;  // local member end forces K_l T u_e
  double compliance = 0.0;
  double equilibrium_residual = 0.0;  // relative

  /// Axial force, tension positive.
  double axial(int e) const { return end_forces[e][3]; }
  double max_shear(int e) const { return std::max(std::abs(end_forces[e][1]), std::abs(end_forces[e][4])); }
  double max_moment(int e) const { return std::max(std::abs(end_forces[e][2]), std::abs(end_forces[e][5])); }
  /// Largest nodal translation magnitude.
  double max_deflection() const;
};

/// Linear static analysis with rigid joints. `inertias` empty means the solid
/// circle law I = A^2/(4 pi). Loads are scaled by `load_scale`.
/// Throws SolverError naming the node and DOF of a mechanism.
FrameResult solve_frame(const FrameGraph& graph, std::span<const double> areas, double youngs,
                        std::span<const double> inertias = {}, double load_scale = 1.0);

/// Convenience: areas taken from the graph edges.
FrameResult solve_frame(const FrameGraph& graph, double youngs, double load_scale = 1.0);

std::string frame_result_json(const FrameGraph& graph, const FrameResult& result);

}  // namespace topoframe
