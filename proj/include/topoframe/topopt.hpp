#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "topoframe/fem2d.hpp"
#include "topoframe/problem.hpp"

namespace topoframe {

/// Element densities on the nx-by-ny grid, row-major from the top-left.
struct DensityField {
  int nx = 0;
  int ny = 0;
  std::vector<double> rho;       // design densities
  std::vector<double> filtered;  // filtered (physical) densities

  double at(int col, int row) const { return filtered[row * nx + col]; }
};

/// Linear density filter with cone weights H(i,j) = max(0, R - dist(i,j)),
/// distances in element units between cell centres.
class DensityFilter {
 public:
  DensityFilter() = default;
  /// `element_volumes` may hold one value (uniform) or one per element.
  DensityFilter(int nx, int ny, double radius, std::span<const double> element_volumes);

  int size() const { return nx_ * ny_; }
  double radius() const { return radius_; }
  /// Neighbour list of element i (including i itself) with weights H(i,j).
  std::span<const int> neighbors(int i) const;
  std::span<const double> weights(int i) const;
  double volume(int i) const { return volumes_[i]; }
  /// sum_k H(i,k) v_k
  double normalizer(int i) const { return normalizer_[i]; }

  /// rho_hat_i = sum_j H(i,j) v_j rho_j / sum_j H(i,j) v_j
  std::vector<double> apply(std::span<const double> rho) const;
  /// Chain rule through the filter: out_i = sum_j g_j d(rho_hat_j)/d(rho_i).
  std::vector<double> backpropagate(std::span<const double> grad_filtered) const;

 private:
  int nx_ = 0, ny_ = 0;
  double radius_ = 0.0;
  std::vector<int> offsets_;
  std::vector<int> cols_;
  std::vector<double> weights_;
  std::vector<double> volumes_;
  std::vector<double> normalizer_;
};

DensityFilter build_filter(const GridMesh& mesh, double radius);

/// SIMP interpolation E(rho) = E_min + rho^p (E - E_min).
inline double penalized_modulus(double rho, double p, double e_solid, double e_void) {
  return e_void + std::pow(rho, p) * (e_solid - e_void);
}

struct SimpParams {
  double penalization = 3.0;
  double youngs_solid = 2.1e5;
  double youngs_void = 1e-9;
};

std::vector<double> element_moduli(std::span<const double> filtered, const SimpParams& simp);

/// dC/drho for design densities, through the filter.
std::vector<double> compliance_sensitivity(const GridMesh& mesh, const Matrix8d& unit_ke,
                                           const Eigen::VectorXd& u, const DensityField& field,
                                           const DensityFilter& filter, const SimpParams& simp);

/// dV/drho with V = sum_j rho_hat_j v_j.
std::vector<double> volume_sensitivity(const DensityFilter& filter);

struct TopOptTrace {
  std::vector<double> compliance;
  std::vector<double> volume_fraction;
  std::vector<double> max_change;

  std::size_t size() const { return compliance.size(); }
};

struct TopOptResult {
  DensityField field;
  TopOptTrace trace;
  bool converged = false;
};

struct TopOptOptions {
  double change_tolerance = 0.01;
  double move_limit = 0.2;
  double damping = 0.5;
  /// Called after each iteration with (iteration, compliance, volume, change).
  std::function<void(int, double, double, double)> progress;
};

/// SIMP minimum-compliance loop starting from the uniform field rho = V_f.
TopOptResult run_topopt(const DesignProblem& problem, const TopOptOptions& options = {});

/// Row-major CSV, one grid row per line, full double precision.
void write_density_csv(const std::filesystem::path& path, int nx, int ny,
                       std::span<const double> values);
std::vector<double> read_density_csv(const std::filesystem::path& path, int nx, int ny);
/// 8-bit binary PGM, black = solid.
void write_density_pgm(const std::filesystem::path& path, int nx, int ny,
                       std::span<const double> values);
void write_topopt_trace_csv(const std::filesystem::path& path, const TopOptTrace& trace);

}  // namespace topoframe
