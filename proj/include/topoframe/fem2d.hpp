#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <memory>
#include <span>
#include <vector>

#include "topoframe/problem.hpp"

namespace topoframe {

using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Matrix38d = Eigen::Matrix<double, 3, 8>;

/// Structured grid of square bilinear elements.
///
/// Nodes are numbered row-major from the top-left corner: node (i, j) with
/// column i in [0, nx] and row j in [0, ny] has id j*(nx+1)+i and sits at
/// Cartesian (i*h, (ny-j)*h). Element (c, r) covers pixel (c, r). DOFs are
/// (2*id, 2*id+1) = (u_x, u_y) with y pointing up.
struct GridMesh {
  int nx = 0;
  int ny = 0;
  double h = 1.0;
  double thickness = 1.0;
  std::vector<char> fixed;  // per dof
  Eigen::VectorXd f;        // load vector (N)

  int num_nodes() const { return (nx + 1) * (ny + 1); }
  int num_dofs() const { return 2 * num_nodes(); }
  int num_elements() const { return nx * ny; }
  int node(int i, int j) const { return j * (nx + 1) + i; }
  /// Element DOFs, counter-clockwise from the bottom-left corner.
  std::array<int, 8> element_dofs(int element) const;
  double element_volume() const { return h * h * thickness; }
};

/// Mesh with loads and constraints taken from the problem. Support and load
/// pixels act on their corner nodes that lie on the domain boundary, or on all
/// four corners for interior pixels; a pixel load is split evenly.
GridMesh make_mesh(const DesignProblem& problem);

/// Plane-stress constitutive matrix for unit Young's modulus.
Eigen::Matrix3d plane_stress_elasticity(double nu);

/// Strain-displacement matrix of a square element of side h at (xi, eta).
Matrix38d strain_displacement(double h, double xi, double eta);

/// Unit-modulus stiffness of a square bilinear element (2x2 Gauss).
Matrix8d element_stiffness(double nu, double h, double t);

struct SolveStats {
  double relative_residual = 0.0;
  bool iterative = false;
};

/// Reusable solver for one mesh: the reduced sparsity pattern and its
/// symbolic factorization are computed once and refactored per solve.
class GridSolver {
 public:
  GridSolver(const GridMesh& mesh, double nu);
  ~GridSolver();
  GridSolver(GridSolver&&) noexcept;
  GridSolver& operator=(GridSolver&&) noexcept;

  /// Solves K(E) u = f for per-element moduli. Fixed DOFs are eliminated.
  /// Throws SolverError on a singular system or a residual above 1e-8.
  Eigen::VectorXd solve(std::span<const double> element_moduli, SolveStats* stats = nullptr);

  const GridMesh& mesh() const { return mesh_; }
  const Matrix8d& element_matrix() const { return ke_; }

 private:
  struct Impl;
  GridMesh mesh_;
  Matrix8d ke_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper over GridSolver.
Eigen::VectorXd assemble_and_solve(const GridMesh& mesh, double nu,
                                   std::span<const double> element_moduli,
                                   SolveStats* stats = nullptr);

inline double compliance(const Eigen::VectorXd& u, const Eigen::VectorXd& f) { return f.dot(u); }

/// Element displacement vector gathered from the global vector.
Eigen::Matrix<double, 8, 1> element_displacements(const GridMesh& mesh, const Eigen::VectorXd& u,
                                                  int element);

}  // namespace topoframe
