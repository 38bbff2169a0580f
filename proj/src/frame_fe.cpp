#include "topoframe/frame_fe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "topoframe/error.hpp"

namespace topoframe {

Matrix6d local_stiffness(double e, double area, double inertia, double length) {
  const double l = length, l2 = l * l, l3 = l2 * l;
  const double a = e * area / l;
  const double b = 12.0 * e * inertia / l3;
  const double c = 6.0 * e * inertia / l2;
  const double d = 4.0 * e * inertia / l;
  const double f = 2.0 * e * inertia / l;
  Matrix6d k;
  k << a, 0, 0, -a, 0, 0,
       0, b, c, 0, -b, c,
       0, c, d, 0, -c, f,
       -a, 0, 0, a, 0, 0,
       0, -b, -c, 0, b, -c,
       0, c, f, 0, -c, d;
  return k;
}

Matrix6d local_stiffness_length_derivative(double e, double area, double inertia, double length) {
  const double l = length, l2 = l * l, l3 = l2 * l, l4 = l3 * l;
  const double a = -e * area / l2;
  const double b = -36.0 * e * inertia / l4;
  const double c = -12.0 * e * inertia / l3;
  const double d = -4.0 * e * inertia / l2;
  const double f = -2.0 * e * inertia / l2;
  Matrix6d k;
  k << a, 0, 0, -a, 0, 0,
       0, b, c, 0, -b, c,
       0, c, d, 0, -c, f,
       -a, 0, 0, a, 0, 0,
       0, -b, -c, 0, b, -c,
       0, c, f, 0, -c, d;
  return k;
}

Matrix6d transformation(double c, double s) {
  Matrix6d t = Matrix6d::Zero();
  for (int b = 0; b < 2; ++b) {
    const int o = 3 * b;
    t(o, o) = c;
    t(o, o + 1) = s;
    t(o + 1, o) = -s;
    t(o + 1, o + 1) = c;
    t(o + 2, o + 2) = 1.0;
  }
  return t;
}

MemberGeometry member_geometry(const FrameGraph& graph, int edge) {
  const auto& a = graph.nodes[graph.edges[edge].n1];
  const auto& b = graph.nodes[graph.edges[edge].n2];
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  const double scale = std::max({1.0, std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y)});
  if (!(len > 1e-9 * scale)) throw Error("collapsed member " + std::to_string(edge) + " (zero length)");
  return {len, dx / len, dy / len};
}

double FrameResult::max_deflection() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i + 2 < u.size(); i += 3)
    m = std::max(m, std::hypot(u[i], u[i + 1]));
  return m;
}

namespace {

const char* dof_name(int k) { return k == 0 ? "x" : (k == 1 ? "y" : "rz"); }

}  // namespace

FrameResult solve_frame(const FrameGraph& graph, std::span<const double> areas, double youngs,
                        std::span<const double> inertias, double load_scale) {
  const int nn = graph.num_nodes(), ne = graph.num_edges();
  if (nn == 0 || ne == 0) throw ValidationError("frame has no members");
  if (areas.size() != static_cast<std::size_t>(ne)) throw ValidationError("area vector does not match the members");
  if (!inertias.empty() && inertias.size() != static_cast<std::size_t>(ne))
    throw ValidationError("inertia vector does not match the members");
  const int ndof = 3 * nn;

  std::vector<MemberGeometry> geo(ne);
  std::vector<Matrix6d> kl(ne), tr(ne);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(ndof, ndof);
  for (int e = 0; e < ne; ++e) {
    if (!(areas[e] > 0)) throw ValidationError("member " + std::to_string(e) + " has non-positive area");
    geo[e] = member_geometry(graph, e);
    const double inertia = inertias.empty() ? solid_circle_inertia(areas[e]) : inertias[e];
    kl[e] = local_stiffness(youngs, areas[e], inertia, geo[e].length);
    tr[e] = transformation(geo[e].c, geo[e].s);
    const Matrix6d kg = tr[e].transpose() * kl[e] * tr[e];
    const int d1 = 3 * graph.edges[e].n1, d2 = 3 * graph.edges[e].n2;
    const int map[6] = {d1, d1 + 1, d1 + 2, d2, d2 + 1, d2 + 2};
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) k(map[a], map[b]) += kg(a, b);
  }

  FrameResult res;
  res.load = Eigen::VectorXd::Zero(ndof);
  std::vector<char> fixed(ndof, 0);
  for (int v = 0; v < nn; ++v) {
    const auto& n = graph.nodes[v];
    if (n.loaded) {
      res.load[3 * v] = n.fx * load_scale;
      res.load[3 * v + 1] = n.fy * load_scale;
    }
    fixed[3 * v] = n.support.x;
    fixed[3 * v + 1] = n.support.y;
    fixed[3 * v + 2] = n.support.rz;
  }
  std::vector<int> free;
  for (int d = 0; d < ndof; ++d)
    if (!fixed[d]) free.push_back(d);
  const int nf = static_cast<int>(free.size());
  if (nf == ndof) throw SolverError("frame has no supports (rigid-body motion)");

  Eigen::MatrixXd kff(nf, nf);
  Eigen::VectorXd ff(nf);
  for (int i = 0; i < nf; ++i) {
    ff[i] = res.load[free[i]];
    for (int j = 0; j < nf; ++j) kff(i, j) = k(free[i], free[j]);
  }

  res.u = Eigen::VectorXd::Zero(ndof);
  if (nf > 0) {
    // Mechanism check through the spectrum of the reduced stiffness.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kff);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues()[0] <= 1e-13 * top) {
      const Eigen::VectorXd mode = eig.eigenvectors().col(0);
      Eigen::Index at = 0;
      mode.cwiseAbs().maxCoeff(&at);
      const int dof = free[at];
      throw SolverError("mechanism: free rigid-body mode dominated by node " + std::to_string(dof / 3) +
                        " dof " + dof_name(dof % 3));
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(kff);
    Eigen::VectorXd x = ldlt.solve(ff);
    // Iterative refinement; the residual is measured as a normwise backward
    // error so that stiffness contrasts between members do not trip it.
    const double kn = kff.lpNorm<Eigen::Infinity>();
    double r = 0.0;
    for (int step = 0; step < 3; ++step) {
      const Eigen::VectorXd rv = ff - kff * x;
      const double scale = kn * x.lpNorm<Eigen::Infinity>() + ff.lpNorm<Eigen::Infinity>();
      r = scale > 0 ? rv.lpNorm<Eigen::Infinity>() / scale : 0.0;
      if (r <= 1e-14) break;
      x += ldlt.solve(rv);
    }
    {
      const double scale = kn * x.lpNorm<Eigen::Infinity>() + ff.lpNorm<Eigen::Infinity>();
      r = scale > 0 ? (ff - kff * x).lpNorm<Eigen::Infinity>() / scale : 0.0;
    }
    if (!(r <= 1e-10)) {
      std::ostringstream msg;
      msg << "frame solve residual " << std::scientific << r << " exceeds 1e-10";
      throw SolverError(msg.str());
    }
    for (int i = 0; i < nf; ++i) res.u[free[i]] = x[i];
  }

  const Eigen::VectorXd internal = k * res.u;
  res.reactions = Eigen::VectorXd::Zero(ndof);
  for (int d = 0; d < ndof; ++d)
    if (fixed[d]) res.reactions[d] = internal[d] - res.load[d];

  res.end_forces.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const int d1 = 3 * graph.edges[e].n1, d2 = 3 * graph.edges[e].n2;
    Vector6d ue;
    ue << res.u[d1], res.u[d1 + 1], res.u[d1 + 2], res.u[d2], res.u[d2 + 1], res.u[d2 + 2];
    res.end_forces[e] = kl[e] * (tr[e] * ue);
  }
  res.compliance = res.load.dot(res.u);

  // Global equilibrium of reactions plus loads: forces and moment about the origin.
  double sx = 0, sy = 0, sm = 0, fscale = 0, lscale = 0;
  for (int v = 0; v < nn; ++v) {
    const auto& n = graph.nodes[v];
    const double px = res.reactions[3 * v] + res.load[3 * v];
    const double py = res.reactions[3 * v + 1] + res.load[3 * v + 1];
    const double pm = res.reactions[3 * v + 2] + res.load[3 * v + 2];
    sx += px;
    sy += py;
    sm += n.x * py - n.y * px + pm;
    fscale += std::abs(res.load[3 * v]) + std::abs(res.load[3 * v + 1]);
    lscale = std::max({lscale, std::abs(n.x), std::abs(n.y)});
  }
  if (fscale > 0) {
    lscale = std::max(lscale, 1.0);
    res.equilibrium_residual = std::sqrt(sx * sx + sy * sy + (sm / lscale) * (sm / lscale)) / fscale;
  }
  return res;
}

FrameResult solve_frame(const FrameGraph& graph, double youngs, double load_scale) {
  std::vector<double> areas;
  for (const auto& e : graph.edges) areas.push_back(e.area);
  return solve_frame(graph, areas, youngs, {}, load_scale);
}

std::string frame_result_json(const FrameGraph& graph, const FrameResult& r) {
  nlohmann::json doc;
  nlohmann::json disp = nlohmann::json::array(), reac = nlohmann::json::array();
  for (int v = 0; v < graph.num_nodes(); ++v) {
    disp.push_back({{"node", v}, {"ux", r.u[3 * v]}, {"uy", r.u[3 * v + 1]}, {"rz", r.u[3 * v + 2]}});
    if (graph.nodes[v].is_support())
      reac.push_back({{"node", v}, {"fx", r.reactions[3 * v]}, {"fy", r.reactions[3 * v + 1]},
                      {"mz", r.reactions[3 * v + 2]}});
  }
  nlohmann::json members = nlohmann::json::array();
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto& f = r.end_forces[e];
    members.push_back({{"id", e}, {"N", r.axial(e)}, {"V", r.max_shear(e)}, {"M_end1", f[2]}, {"M_end2", f[5]}});
  }
  doc["displacements"] = disp;
  doc["reactions"] = reac;
  doc["members"] = members;
  doc["compliance"] = r.compliance;
  doc["equilibrium_residual"] = r.equilibrium_residual;
  return doc.dump(2) + "\n";
}

}  // namespace topoframe
