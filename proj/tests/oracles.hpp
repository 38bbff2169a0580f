// Independent reference computations shared by the unit tests and the
// acceptance runner.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "topoframe/fem2d.hpp"
#include "topoframe/frame_fe.hpp"
#include "topoframe/frame_opt.hpp"
#include "topoframe/graph.hpp"
#include "topoframe/raster.hpp"
#include "topoframe/topopt.hpp"

namespace oracle {

using namespace topoframe;

// Componentwise error scaled by the larger of |reference| and a floor taken
// from the largest reference entry, so near-zero entries do not dominate.
inline double relative_error(std::span<const double> got, std::span<const double> ref, double floor = 1e-3) {
  double scale = 0.0;
  for (double r : ref) scale = std::max(scale, std::abs(r));
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double denom = std::max(std::abs(ref[i]), floor * scale);
    if (denom == 0.0) continue;
    worst = std::max(worst, std::abs(got[i] - ref[i]) / denom);
  }
  return worst;
}

// ---- continuum ----------------------------------------------------------

// Cantilever on a small grid: left column clamped, downward load at the
// middle of the right edge.
inline DesignProblem small_cantilever(int nx, int ny) {
  DesignProblem p = default_parameters();
  p.nx = nx;
  p.ny = ny;
  p.h = 1.0;
  p.thickness = 1.0;
  p.youngs_solid = 1.0;
  p.youngs_void = 1e-3;
  Support s;
  s.pixel = p.pixel_index(0, 0);
  s.to_pixel = p.pixel_index(0, ny - 1);
  s.dofs = {true, true, false};
  p.supports = {s};
  p.loads = {{p.pixel_index(nx - 1, ny / 2), 0.0, -1.0}};
  return p;
}

// C = f^T u of the filtered, penalized design, solved from scratch.
inline double topology_compliance(const DesignProblem& p, const DensityFilter& filter, std::span<const double> rho) {
  const GridMesh mesh = make_mesh(p);
  const auto filtered = filter.apply(rho);
  const SimpParams simp{p.penalization, p.youngs_solid, p.youngs_void};
  const auto moduli = element_moduli(filtered, simp);
  const Eigen::VectorXd u = assemble_and_solve(mesh, p.poisson, moduli);
  return mesh.f.dot(u);
}

inline double filtered_volume(const DensityFilter& filter, std::span<const double> rho) {
  const auto f = filter.apply(rho);
  double v = 0.0;
  for (int i = 0; i < filter.size(); ++i) v += f[i] * filter.volume(i);
  return v;
}

// ---- frames -------------------------------------------------------------

// Random connected frame: a spanning tree plus extra chords, node 0 clamped,
// the last node loaded. Every other node is free.
inline FrameGraph random_frame(std::mt19937_64& rng, int members) {
  std::uniform_real_distribution<double> ux(0.0, 1500.0), uy(0.0, 520.0), ua(300.0, 1500.0);
  const int n = std::clamp(members, 3, 5);
  FrameGraph g;
  // nodes kept well apart so no member is nearly collapsed
  while (g.num_nodes() < n) {
    GraphNode node;
    node.x = ux(rng);
    node.y = uy(rng);
    bool clear = true;
    for (const auto& o : g.nodes) clear = clear && std::hypot(o.x - node.x, o.y - node.y) >= 150.0;
    if (clear) g.nodes.push_back(node);
  }
  g.nodes[0].support = {true, true, true};
  g.nodes[n - 1].loaded = true;
  std::uniform_real_distribution<double> uf(-1e5, 1e5);
  g.nodes[n - 1].fx = uf(rng);
  g.nodes[n - 1].fy = -std::abs(uf(rng)) - 1e4;

  std::set<std::pair<int, int>> used;
  const auto add = [&](int a, int b) {
    if (a == b) return false;
    const auto key = std::minmax(a, b);
    if (!used.insert(key).second) return false;
    GraphEdge e;
    e.n1 = a;
    e.n2 = b;
    e.area = ua(rng);
    g.edges.push_back(e);
    return true;
  };
  for (int i = 1; i < n; ++i) add(i, std::uniform_int_distribution<int>(0, i - 1)(rng));
  const int max_edges = n * (n - 1) / 2;
  const int target = std::min(std::max(members, n - 1), max_edges);
  std::uniform_int_distribution<int> pick(0, n - 1);
  while (g.num_edges() < target) add(pick(rng), pick(rng));
  return g;
}

inline std::vector<double> areas_of(const FrameGraph& g) {
  std::vector<double> a;
  for (const auto& e : g.edges) a.push_back(e.area);
  return a;
}

inline double frame_compliance(const FrameGraph& g, std::span<const double> areas, double youngs) {
  return solve_frame(g, areas, youngs).compliance;
}

inline double frame_volume(const FrameGraph& g, std::span<const double> areas) {
  double v = 0.0;
  for (int e = 0; e < g.num_edges(); ++e) v += areas[e] * g.length(e);
  return v;
}

// Extended-precision frame compliance written from scratch: Euler-Bernoulli
// elements with I = A^2 / (4 pi), dense Cholesky on the free dofs. Used by
// the finite-difference checks, where double-precision solves leave roughly
// 1e-13 relative noise in C, too much for the small steps.
using Real = long double;

inline Real frame_compliance_ext(const FrameGraph& g, const std::vector<Real>& x, const std::vector<Real>& y,
                                 const std::vector<Real>& areas, Real youngs) {
  using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  const int n = 3 * g.num_nodes();
  MatX k = MatX::Zero(n, n);
  const Real pi = 3.14159265358979323846264338327950288L;
  for (int e = 0; e < g.num_edges(); ++e) {
    const int a = g.edges[e].n1, b = g.edges[e].n2;
    const Real dx = x[b] - x[a], dy = y[b] - y[a];
    const Real len = std::sqrt(dx * dx + dy * dy), c = dx / len, s = dy / len;
    const Real ea = youngs * areas[e] / len, ei = youngs * areas[e] * areas[e] / (4 * pi) / len;
    Eigen::Matrix<Real, 6, 6> kl = Eigen::Matrix<Real, 6, 6>::Zero();
    kl(0, 0) = kl(3, 3) = ea;
    kl(0, 3) = kl(3, 0) = -ea;
    const Real b1 = 12 * ei / (len * len), b2 = 6 * ei / len;
    kl(1, 1) = kl(4, 4) = b1;
    kl(1, 4) = kl(4, 1) = -b1;
    kl(1, 2) = kl(2, 1) = kl(1, 5) = kl(5, 1) = b2;
    kl(4, 2) = kl(2, 4) = kl(4, 5) = kl(5, 4) = -b2;
    kl(2, 2) = kl(5, 5) = 4 * ei;
    kl(2, 5) = kl(5, 2) = 2 * ei;
    Eigen::Matrix<Real, 6, 6> t = Eigen::Matrix<Real, 6, 6>::Zero();
    for (int o : {0, 3}) {
      t(o, o) = c;
      t(o, o + 1) = s;
      t(o + 1, o) = -s;
      t(o + 1, o + 1) = c;
      t(o + 2, o + 2) = 1;
    }
    const Eigen::Matrix<Real, 6, 6> kg = t.transpose() * kl * t;
    const int dofs[6] = {3 * a, 3 * a + 1, 3 * a + 2, 3 * b, 3 * b + 1, 3 * b + 2};
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) k(dofs[i], dofs[j]) += kg(i, j);
  }
  std::vector<int> free;
  VecX f = VecX::Zero(n);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const auto& node = g.nodes[v];
    f[3 * v] = node.fx;
    f[3 * v + 1] = node.fy;
    const bool fixed[3] = {node.support.x, node.support.y, node.support.rz};
    for (int d = 0; d < 3; ++d)
      if (!fixed[d]) free.push_back(3 * v + d);
  }
  const int m = static_cast<int>(free.size());
  MatX kf(m, m);
  VecX ff(m);
  for (int i = 0; i < m; ++i) {
    ff[i] = f[free[i]];
    for (int j = 0; j < m; ++j) kf(i, j) = k(free[i], free[j]);
  }
  const VecX u = kf.llt().solve(ff);
  return ff.dot(u);
}

inline std::vector<Real> coords(const FrameGraph& g, int axis) {
  std::vector<Real> c;
  for (const auto& n : g.nodes) c.push_back(axis == 0 ? n.x : n.y);
  return c;
}

inline Real volume_ext(const FrameGraph& g, const std::vector<Real>& x, const std::vector<Real>& y,
                       const std::vector<Real>& areas) {
  Real v = 0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const int a = g.edges[e].n1, b = g.edges[e].n2;
    v += areas[e] * std::sqrt((x[b] - x[a]) * (x[b] - x[a]) + (y[b] - y[a]) * (y[b] - y[a]));
  }
  return v;
}

// Central differences of C and V with respect to every area.
inline void size_fd(const FrameGraph& g, double youngs, double rel_step, std::vector<double>& dc,
                    std::vector<double>& dv) {
  const auto x = coords(g, 0), y = coords(g, 1);
  std::vector<Real> a;
  for (const auto& e : g.edges) a.push_back(e.area);
  dc.assign(a.size(), 0.0);
  dv.assign(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real step = rel_step * a[i];
    auto ap = a, am = a;
    ap[i] += step;
    am[i] -= step;
    dc[i] = static_cast<double>(
        (frame_compliance_ext(g, x, y, ap, youngs) - frame_compliance_ext(g, x, y, am, youngs)) / (2 * step));
    dv[i] = static_cast<double>((volume_ext(g, x, y, ap) - volume_ext(g, x, y, am)) / (2 * step));
  }
}

// Central differences with respect to (x, y) of every untagged node.
inline void layout_fd(const FrameGraph& g, double youngs, double step, std::vector<double>& dc,
                      std::vector<double>& dv) {
  const auto x = coords(g, 0), y = coords(g, 1);
  std::vector<Real> a;
  for (const auto& e : g.edges) a.push_back(e.area);
  dc.clear();
  dv.clear();
  for (int n = 0; n < g.num_nodes(); ++n) {
    if (g.nodes[n].tagged()) continue;
    for (int k = 0; k < 2; ++k) {
      auto xp = x, xm = x, yp = y, ym = y;
      (k == 0 ? xp : yp)[n] += step;
      (k == 0 ? xm : ym)[n] -= step;
      dc.push_back(static_cast<double>(
          (frame_compliance_ext(g, xp, yp, a, youngs) - frame_compliance_ext(g, xm, ym, a, youngs)) / (2 * step)));
      dv.push_back(static_cast<double>((volume_ext(g, xp, yp, a) - volume_ext(g, xm, ym, a)) / (2 * step)));
    }
  }
}

// ---- rasters ------------------------------------------------------------

// 8-connected foreground components.
inline int count_components(const BinaryRaster& r) {
  std::vector<char> seen(r.bits.size(), 0);
  int count = 0;
  for (int start = 0; start < static_cast<int>(r.bits.size()); ++start) {
    if (!r.bits[start] || seen[start]) continue;
    ++count;
    std::deque<int> q{start};
    seen[start] = 1;
    while (!q.empty()) {
      const int p = q.front();
      q.pop_front();
      const int c = p % r.width, row = p / r.width;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = c + dc, rr = row + dr;
          if (!r.inside(cc, rr)) continue;
          const int k = r.index(cc, rr);
          if (r.bits[k] && !seen[k]) {
            seen[k] = 1;
            q.push_back(k);
          }
        }
    }
  }
  return count;
}

// 4-connected background components that do not reach the image border.
inline int count_holes(const BinaryRaster& r) {
  std::vector<char> seen(r.bits.size(), 0);
  int holes = 0;
  for (int start = 0; start < static_cast<int>(r.bits.size()); ++start) {
    if (r.bits[start] || seen[start]) continue;
    bool border = false;
    std::deque<int> q{start};
    seen[start] = 1;
    while (!q.empty()) {
      const int p = q.front();
      q.pop_front();
      const int c = p % r.width, row = p / r.width;
      if (c == 0 || row == 0 || c == r.width - 1 || row == r.height - 1) border = true;
      const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& o : d) {
        const int cc = c + o[0], rr = row + o[1];
        if (!r.inside(cc, rr)) continue;
        const int k = r.index(cc, rr);
        if (!r.bits[k] && !seen[k]) {
          seen[k] = 1;
          q.push_back(k);
        }
      }
    }
    if (!border) ++holes;
  }
  return holes;
}

inline bool has_square(const BinaryRaster& r) {
  for (int row = 0; row + 1 < r.height; ++row)
    for (int c = 0; c + 1 < r.width; ++c)
      if (r.get(c, row) && r.get(c + 1, row) && r.get(c, row + 1) && r.get(c + 1, row + 1)) return true;
  return false;
}

// Union of random discs and bars with a few random tags on set pixels.
inline BinaryRaster random_blob(std::mt19937_64& rng, int w, int h) {
  BinaryRaster r(w, h);
  std::uniform_int_distribution<int> shapes(1, 5), kind(0, 1);
  std::uniform_real_distribution<double> cx(0, w), cy(0, h), rad(2.0, 7.0), len(4.0, 20.0);
  const int n = shapes(rng);
  for (int s = 0; s < n; ++s) {
    const double x0 = cx(rng), y0 = cy(rng);
    if (kind(rng) == 0) {
      const double rr = rad(rng);
      for (int row = 0; row < h; ++row)
        for (int c = 0; c < w; ++c)
          if (std::hypot(c - x0, row - y0) <= rr) r.set(c, row, true);
    } else {
      const double hw = len(rng) / 2, hh = rad(rng) / 2;
      const bool vertical = kind(rng) == 1;
      for (int row = 0; row < h; ++row)
        for (int c = 0; c < w; ++c) {
          const double dx = std::abs(c - x0), dy = std::abs(row - y0);
          if (vertical ? (dx <= hh && dy <= hw) : (dx <= hw && dy <= hh)) r.set(c, row, true);
        }
    }
  }
  // occasional hole punched through
  if (kind(rng) == 0) {
    const double x0 = cx(rng), y0 = cy(rng);
    for (int row = 0; row < h; ++row)
      for (int c = 0; c < w; ++c)
        if (std::hypot(c - x0, row - y0) <= 1.5) r.set(c, row, false);
  }
  std::vector<int> set;
  for (int i = 0; i < w * h; ++i)
    if (r.bits[i]) set.push_back(i);
  std::uniform_int_distribution<int> ntags(0, 3);
  const int k = ntags(rng);
  for (int t = 0; t < k && !set.empty(); ++t)
    r.tags.push_back(set[std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(rng)]);
  std::sort(r.tags.begin(), r.tags.end());
  r.tags.erase(std::unique(r.tags.begin(), r.tags.end()), r.tags.end());
  return r;
}

// Exhaustive Otsu search in exact integer arithmetic. For a cut k the
// between-class variance is (n1*s0 - n0*s1)^2 / (T^2 n0 n1); candidates are
// compared by cross-multiplication so ties resolve exactly to the smallest k.
inline int otsu_exhaustive(std::span<const double> values) {
  using i128 = __int128;
  int best = 0;
  i128 best_num = -1, best_den = 1;
  for (int k = 1; k < 256; ++k) {
    std::int64_t n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (double v : values) {
      const int b = histogram_bin(v);
      if (b < k) {
        ++n0;
        s0 += b;
      } else {
        ++n1;
        s1 += b;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const i128 d = i128(n1) * s0 - i128(n0) * s1;
    const i128 num = d * d, den = i128(n0) * n1;
    if (best_num < 0 || num * best_den > best_num * den) {
      best = k;
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

}  // namespace oracle
