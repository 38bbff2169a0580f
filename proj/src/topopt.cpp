#include "topoframe/topopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

#include "topoframe/error.hpp"
#include "topoframe/mma.hpp"

namespace topoframe {

DensityFilter::DensityFilter(int nx, int ny, double radius, std::span<const double> element_volumes)
    : nx_(nx), ny_(ny), radius_(radius) {
  if (nx <= 0 || ny <= 0) throw ValidationError("filter grid must be non-empty");
  if (!(radius > 0)) throw ValidationError("filter radius must be positive");
  const int n = nx * ny;
  if (element_volumes.size() == 1) volumes_.assign(n, element_volumes[0]);
  else if (element_volumes.size() == static_cast<std::size_t>(n))
    volumes_.assign(element_volumes.begin(), element_volumes.end());
  else throw ValidationError("filter volume vector does not match the grid");

  const int reach = static_cast<int>(std::ceil(radius)) - 1;
  offsets_.reserve(n + 1);
  offsets_.push_back(0);
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      for (int r2 = std::max(0, r - reach); r2 <= std::min(ny - 1, r + reach); ++r2) {
        for (int c2 = std::max(0, c - reach); c2 <= std::min(nx - 1, c + reach); ++c2) {
          const double dist = std::hypot(c - c2, r - r2);
          if (dist < radius) {
            cols_.push_back(r2 * nx + c2);
            weights_.push_back(radius - dist);
          }
        }
      }
      offsets_.push_back(static_cast<int>(cols_.size()));
    }
  }
  normalizer_.resize(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) s += weights_[k] * volumes_[cols_[k]];
    normalizer_[i] = s;
  }
}

std::span<const int> DensityFilter::neighbors(int i) const {
  return {cols_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
}

std::span<const double> DensityFilter::weights(int i) const {
  return {weights_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
}

std::vector<double> DensityFilter::apply(std::span<const double> rho) const {
  const int n = size();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k)
      s += weights_[k] * volumes_[cols_[k]] * rho[cols_[k]];
    out[i] = s / normalizer_[i];
  }
  return out;
}

std::vector<double> DensityFilter::backpropagate(std::span<const double> grad_filtered) const {
  // d(rho_hat_j)/d(rho_i) = H(j,i) v_i / S_j, and H is symmetric, so the
  // neighbour list of i doubles as the list of j that see i.
  const int n = size();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      const int j = cols_[k];
      s += grad_filtered[j] * weights_[k] / normalizer_[j];
    }
    out[i] = s * volumes_[i];
  }
  return out;
}

DensityFilter build_filter(const GridMesh& mesh, double radius) {
  const double v = mesh.element_volume();
  return DensityFilter(mesh.nx, mesh.ny, radius, std::span<const double>(&v, 1));
}

std::vector<double> element_moduli(std::span<const double> filtered, const SimpParams& simp) {
  std::vector<double> e(filtered.size());
  for (std::size_t i = 0; i < filtered.size(); ++i)
    e[i] = penalized_modulus(filtered[i], simp.penalization, simp.youngs_solid, simp.youngs_void);
  return e;
}

std::vector<double> compliance_sensitivity(const GridMesh& mesh, const Matrix8d& unit_ke,
                                           const Eigen::VectorXd& u, const DensityField& field,
                                           const DensityFilter& filter, const SimpParams& simp) {
  const int n = mesh.num_elements();
  std::vector<double> dc_hat(n);
  const double range = simp.youngs_solid - simp.youngs_void;
  for (int e = 0; e < n; ++e) {
    const auto ue = element_displacements(mesh, u, e);
    const double energy = ue.dot(unit_ke * ue);
    const double rho = field.filtered[e];
    dc_hat[e] = -simp.penalization * std::pow(rho, simp.penalization - 1.0) * range * energy;
  }
  return filter.backpropagate(dc_hat);
}

std::vector<double> volume_sensitivity(const DensityFilter& filter) {
  std::vector<double> dv_hat(filter.size());
  for (int j = 0; j < filter.size(); ++j) dv_hat[j] = filter.volume(j);
  return filter.backpropagate(dv_hat);
}

namespace {

double filtered_volume(const DensityFilter& filter, std::span<const double> filtered) {
  double v = 0.0;
  for (int i = 0; i < filter.size(); ++i) v += filtered[i] * filter.volume(i);
  return v;
}

// Optimality-criteria update; the multiplier is bisected until the filtered
// volume of the new design hits the budget.
std::vector<double> oc_update(const std::vector<double>& x, const std::vector<double>& dc,
                              const std::vector<double>& dv, const DensityFilter& filter,
                              double budget, const TopOptOptions& opt) {
  const std::size_t n = x.size();
  std::vector<double> xnew(n);
  const auto candidate = [&](double lambda) {
    for (std::size_t i = 0; i < n; ++i) {
      const double b = std::max(0.0, -dc[i]) / (lambda * dv[i]);
      const double trial = x[i] * std::pow(b, opt.damping);
      const double lo = std::max(0.0, x[i] - opt.move_limit);
      const double hi = std::min(1.0, x[i] + opt.move_limit);
      xnew[i] = std::clamp(trial, lo, hi);
    }
    return filtered_volume(filter, filter.apply(xnew));
  };

  double lo = 0.0, hi = 1.0;
  // Grow the bracket until the volume drops below the budget.
  for (int k = 0; k < 2000 && candidate(hi) > budget; ++k) {
    lo = hi;
    hi *= 2.0;
  }
  if (lo == 0.0) {
    // Shrink the lower end so the bracket contains the crossing.
    lo = hi;
    for (int k = 0; k < 2000 && lo > std::numeric_limits<double>::min(); ++k) {
      lo *= 0.5;
      if (candidate(lo) > budget) break;
    }
  }
  for (int k = 0; k < 200 && (hi - lo) > 1e-14 * (hi + lo); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (candidate(mid) > budget) lo = mid;
    else hi = mid;
  }
  candidate(hi);
  return xnew;
}

}  // namespace

TopOptResult run_topopt(const DesignProblem& problem, const TopOptOptions& options) {
  validate(problem);
  const GridMesh mesh = make_mesh(problem);
  GridSolver solver(mesh, problem.poisson);
  const DensityFilter filter = build_filter(mesh, problem.filter_radius);
  const SimpParams simp{problem.penalization, problem.youngs_solid, problem.youngs_void};
  const double total = problem.domain_volume();
  const double budget = problem.volume_budget();
  const int n = mesh.num_elements();

  TopOptResult result;
  result.field.nx = problem.nx;
  result.field.ny = problem.ny;
  result.field.rho.assign(n, problem.volume_fraction);
  const std::vector<double> dv = volume_sensitivity(filter);

  std::unique_ptr<Mma> mma;
  if (problem.topopt_method == TopOptMethod::Mma) {
    MmaOptions mo;
    mo.move_limit = options.move_limit;
    mma = std::make_unique<Mma>(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), mo);
  }
  double c_scale = 0.0;

  auto& x = result.field.rho;
  for (int it = 1; it <= problem.max_iter_top; ++it) {
    result.field.filtered = filter.apply(x);
    const auto moduli = element_moduli(result.field.filtered, simp);
    Eigen::VectorXd u;
    try {
      u = solver.solve(moduli);
    } catch (const SolverError& e) {
      throw SolverError("topology iteration " + std::to_string(it) + ": " + e.what());
    }
    const double c = compliance(u, mesh.f);
    const auto dc = compliance_sensitivity(mesh, solver.element_matrix(), u, result.field, filter, simp);
    const double vol = filtered_volume(filter, result.field.filtered);

    std::vector<double> xnew;
    if (mma) {
      if (c_scale == 0.0) c_scale = c > 0 ? 1.0 / c : 1.0;
      std::vector<double> df(n), dg(n);
      for (int i = 0; i < n; ++i) {
        df[i] = dc[i] * c_scale;
        dg[i] = dv[i] / total;
      }
      xnew = mma->step(x, c * c_scale, df, vol / total - problem.volume_fraction, dg);
    } else {
      xnew = oc_update(x, dc, dv, filter, budget, options);
    }
    double change = 0.0;
    for (int i = 0; i < n; ++i) change = std::max(change, std::abs(xnew[i] - x[i]));
    x = std::move(xnew);

    result.trace.compliance.push_back(c);
    result.trace.volume_fraction.push_back(vol / total);
    result.trace.max_change.push_back(change);
    if (options.progress) options.progress(it, c, vol / total, change);
    if (change < options.change_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.field.filtered = filter.apply(x);
  return result;
}

void write_density_csv(const std::filesystem::path& path, int nx, int ny,
                       std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(nx) * ny)
    throw Error("density vector does not match the grid");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      if (c) out << ',';
      out << values[r * nx + c];
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<double> read_density_csv(const std::filesystem::path& path, int nx, int ny) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(nx) * ny);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      // strtod, unlike stod, accepts subnormal values
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end == cell.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw ParseError(path.string() + ": bad number '" + cell + "' on row " + std::to_string(rows + 1));
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != nx)
      throw ParseError(path.string() + ": row " + std::to_string(rows + 1) + " has " +
                       std::to_string(cols) + " values, expected " + std::to_string(nx));
    ++rows;
  }
  if (rows != ny)
    throw ParseError(path.string() + ": " + std::to_string(rows) + " rows, expected " + std::to_string(ny));
  return values;
}

void write_density_pgm(const std::filesystem::path& path, int nx, int ny,
                       std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << nx << ' ' << ny << "\n255\n";
  for (int i = 0; i < nx * ny; ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)))));
  }
  if (!out) throw Error("write failed for " + path.string());
}

void write_topopt_trace_csv(const std::filesystem::path& path, const TopOptTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,compliance,volume_fraction,max_change\n" << std::setprecision(12);
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i + 1 << ',' << trace.compliance[i] << ',' << trace.volume_fraction[i] << ','
        << trace.max_change[i] << '\n';
}

}  // namespace topoframe
