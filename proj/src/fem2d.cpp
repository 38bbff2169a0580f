#include "topoframe/fem2d.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <string>

namespace topoframe {

namespace {

// Corner nodes of pixel (c, r) that carry its boundary conditions.
std::vector<int> pixel_nodes(const GridMesh& m, int pixel) {
  const int c = pixel % m.nx, r = pixel / m.nx;
  const std::array<std::array<int, 2>, 4> corners{{{c, r + 1}, {c + 1, r + 1}, {c + 1, r}, {c, r}}};
  std::vector<int> on_boundary, all;
  for (const auto& [i, j] : corners) {
    all.push_back(m.node(i, j));
    if (i == 0 || i == m.nx || j == 0 || j == m.ny) on_boundary.push_back(m.node(i, j));
  }
  return on_boundary.empty() ? all : on_boundary;
}

// Solid grids up to this many elements use the direct factorization.
constexpr int kDirectSolveLimit = 200 * 200;

}  // namespace

std::array<int, 8> GridMesh::element_dofs(int element) const {
  const int c = element % nx, r = element / nx;
  const int n[4] = {node(c, r + 1), node(c + 1, r + 1), node(c + 1, r), node(c, r)};
  return {2 * n[0], 2 * n[0] + 1, 2 * n[1], 2 * n[1] + 1,
          2 * n[2], 2 * n[2] + 1, 2 * n[3], 2 * n[3] + 1};
}

GridMesh make_mesh(const DesignProblem& problem) {
  GridMesh m;
  m.nx = problem.nx;
  m.ny = problem.ny;
  m.h = problem.h;
  m.thickness = problem.thickness;
  m.fixed.assign(m.num_dofs(), 0);
  m.f = Eigen::VectorXd::Zero(m.num_dofs());
  for (const auto& [pixel, dofs] : problem.support_pixels()) {
    for (int n : pixel_nodes(m, pixel)) {
      if (dofs.x) m.fixed[2 * n] = 1;
      if (dofs.y) m.fixed[2 * n + 1] = 1;
    }
  }
  for (const auto& load : problem.loads) {
    const auto nodes = pixel_nodes(m, load.pixel);
    const double share = 1.0 / static_cast<double>(nodes.size());
    for (int n : nodes) {
      m.f[2 * n] += load.fx * share;
      m.f[2 * n + 1] += load.fy * share;
    }
  }
  return m;
}

Eigen::Matrix3d plane_stress_elasticity(double nu) {
  Eigen::Matrix3d d;
  d << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0;
  return d / (1.0 - nu * nu);
}

Matrix38d strain_displacement(double h, double xi, double eta) {
  // Shape function derivatives in natural coordinates, nodes CCW from (-1,-1).
  const double dxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
  const double deta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
  const double scale = 2.0 / h;  // d(xi)/dx for a square element
  Matrix38d b = Matrix38d::Zero();
  for (int a = 0; a < 4; ++a) {
    const double nx = dxi[a] * scale, ny = deta[a] * scale;
    b(0, 2 * a) = nx;
    b(1, 2 * a + 1) = ny;
    b(2, 2 * a) = ny;
    b(2, 2 * a + 1) = nx;
  }
  return b;
}

Matrix8d element_stiffness(double nu, double h, double t) {
  const Eigen::Matrix3d d = plane_stress_elasticity(nu);
  const double g = 1.0 / std::sqrt(3.0);
  const double det_j = h * h / 4.0;
  Matrix8d k = Matrix8d::Zero();
  for (double xi : {-g, g}) {
    for (double eta : {-g, g}) {
      const Matrix38d b = strain_displacement(h, xi, eta);
      k += b.transpose() * d * b * (det_j * t);
    }
  }
  return 0.5 * (k + k.transpose());
}

Eigen::Matrix<double, 8, 1> element_displacements(const GridMesh& mesh, const Eigen::VectorXd& u,
                                                  int element) {
  Eigen::Matrix<double, 8, 1> ue;
  const auto dofs = mesh.element_dofs(element);
  for (int a = 0; a < 8; ++a) ue[a] = u[dofs[a]];
  return ue;
}

struct GridSolver::Impl {
  std::vector<int> free_index;  // dof -> reduced index or -1
  std::vector<int> free_dofs;
  Eigen::SparseMatrix<double> k;  // lower triangle of the reduced matrix
  std::vector<std::array<int, 64>> slots;  // per element: value slot of entry (a,b) or -1
  Eigen::VectorXd f_free;
  bool iterative = false;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  bool analyzed = false;
};

GridSolver::GridSolver(const GridMesh& mesh, double nu)
    : mesh_(mesh), ke_(element_stiffness(nu, mesh.h, mesh.thickness)), impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  const int ndof = mesh_.num_dofs();
  im.free_index.assign(ndof, -1);
  for (int d = 0; d < ndof; ++d) {
    if (!mesh_.fixed[d]) {
      im.free_index[d] = static_cast<int>(im.free_dofs.size());
      im.free_dofs.push_back(d);
    }
  }
  if (im.free_dofs.size() == static_cast<std::size_t>(ndof))
    throw SolverError("singular system: no degrees of freedom are fixed");
  const int n = static_cast<int>(im.free_dofs.size());
  im.f_free.resize(n);
  for (int i = 0; i < n; ++i) im.f_free[i] = mesh_.f[im.free_dofs[i]];

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh_.num_elements()) * 36);
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const auto dofs = mesh_.element_dofs(e);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const int ia = im.free_index[dofs[a]], ib = im.free_index[dofs[b]];
        if (ia >= 0 && ib >= 0 && ia >= ib) trips.emplace_back(ia, ib, 1.0);
      }
    }
  }
  im.k.resize(n, n);
  im.k.setFromTriplets(trips.begin(), trips.end());
  im.k.makeCompressed();

  im.slots.resize(mesh_.num_elements());
  const int* outer = im.k.outerIndexPtr();
  const int* inner = im.k.innerIndexPtr();
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const auto dofs = mesh_.element_dofs(e);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const int ia = im.free_index[dofs[a]], ib = im.free_index[dofs[b]];
        int slot = -1;
        if (ia >= 0 && ib >= 0 && ia >= ib) {
          const int* first = inner + outer[ib];
          const int* last = inner + outer[ib + 1];
          slot = static_cast<int>(std::lower_bound(first, last, ia) - inner);
        }
        im.slots[e][a * 8 + b] = slot;
      }
    }
  }
  im.iterative = mesh_.num_elements() > kDirectSolveLimit;
}

GridSolver::~GridSolver() = default;
GridSolver::GridSolver(GridSolver&&) noexcept = default;
GridSolver& GridSolver::operator=(GridSolver&&) noexcept = default;

Eigen::VectorXd GridSolver::solve(std::span<const double> element_moduli, SolveStats* stats) {
  auto& im = *impl_;
  if (element_moduli.size() != static_cast<std::size_t>(mesh_.num_elements()))
    throw SolverError("modulus vector does not match the mesh");

  double* values = im.k.valuePtr();
  std::fill(values, values + im.k.nonZeros(), 0.0);
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const double modulus = element_moduli[e];
    const auto& slots = im.slots[e];
    for (int ab = 0; ab < 64; ++ab)
      if (slots[ab] >= 0) values[slots[ab]] += modulus * ke_(ab / 8, ab % 8);
  }

  Eigen::VectorXd x;
  if (im.f_free.squaredNorm() == 0.0) {
    x = Eigen::VectorXd::Zero(im.f_free.size());
  } else if (!im.iterative) {
    if (!im.analyzed) {
      im.llt.analyzePattern(im.k);
      im.analyzed = true;
    }
    im.llt.factorize(im.k);
    if (im.llt.info() != Eigen::Success)
      throw SolverError("singular system: stiffness matrix is not positive definite "
                        "(insufficient supports)");
    x = im.llt.solve(im.f_free);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower,
                             Eigen::IncompleteCholesky<double, Eigen::Lower>>
        cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(20 * static_cast<int>(im.f_free.size()));
    cg.compute(im.k);
    if (cg.info() != Eigen::Success) throw SolverError("preconditioner construction failed");
    x = cg.solve(im.f_free);
    if (cg.info() != Eigen::Success)
      throw SolverError("conjugate gradient did not converge, residual " +
                        std::to_string(cg.error()));
  }

  const double fnorm = im.f_free.norm();
  double residual = 0.0;
  if (fnorm > 0) {
    const Eigen::VectorXd r = im.k.selfadjointView<Eigen::Lower>() * x - im.f_free;
    residual = r.norm() / fnorm;
  }
  if (!std::isfinite(residual) || residual > 1e-8)
    throw SolverError("linear solve residual " + std::to_string(residual) +
                      " exceeds 1e-8 (nearly singular system)");
  if (stats) {
    stats->relative_residual = residual;
    stats->iterative = im.iterative;
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(mesh_.num_dofs());
  for (std::size_t i = 0; i < im.free_dofs.size(); ++i) u[im.free_dofs[i]] = x[i];
  return u;
}

Eigen::VectorXd assemble_and_solve(const GridMesh& mesh, double nu,
                                   std::span<const double> element_moduli, SolveStats* stats) {
  GridSolver solver(mesh, nu);
  return solver.solve(element_moduli, stats);
}

}  // namespace topoframe
