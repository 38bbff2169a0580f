#include "topoframe/frame_opt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "topoframe/error.hpp"
#include "topoframe/mma.hpp"

namespace topoframe {

namespace {

Vector6d element_vector(const FrameGraph& g, const FrameResult& r, int e) {
  const int d1 = 3 * g.edges[e].n1, d2 = 3 * g.edges[e].n2;
  Vector6d ue;
  ue << r.u[d1], r.u[d1 + 1], r.u[d1 + 2], r.u[d2], r.u[d2 + 1], r.u[d2 + 2];
  return ue;
}

// Derivative of the rotation blocks for given (dc, ds).
Matrix6d transformation_derivative(double dc, double ds) {
  Matrix6d t = Matrix6d::Zero();
  for (int b = 0; b < 2; ++b) {
    const int o = 3 * b;
    t(o, o) = dc;
    t(o, o + 1) = ds;
    t(o + 1, o) = -ds;
    t(o + 1, o + 1) = dc;
  }
  return t;
}

std::vector<double> lengths_of(const FrameGraph& g) {
  std::vector<double> l(g.edges.size());
  for (int e = 0; e < g.num_edges(); ++e) l[e] = g.length(e);
  return l;
}

std::vector<double> areas_of(const FrameGraph& g) {
  std::vector<double> a;
  for (const auto& e : g.edges) a.push_back(e.area);
  return a;
}

void set_areas(FrameGraph& g, const std::vector<double>& a) {
  for (int e = 0; e < g.num_edges(); ++e) g.edges[e].area = a[e];
}

double volume_of(std::span<const double> areas, std::span<const double> lengths) {
  double v = 0.0;
  for (std::size_t i = 0; i < areas.size(); ++i) v += areas[i] * lengths[i];
  return v;
}

double shortest_member(const FrameGraph& g) {
  double m = std::numeric_limits<double>::infinity();
  for (int e = 0; e < g.num_edges(); ++e) m = std::min(m, g.length(e));
  return m;
}

}  // namespace

std::vector<double> size_gradient(const FrameGraph& graph, const FrameResult& result,
                                  std::span<const double> areas, double youngs) {
  std::vector<double> g(graph.edges.size());
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto geo = member_geometry(graph, e);
    const Matrix6d dkl = local_stiffness(youngs, 1.0, solid_circle_inertia_slope(areas[e]), geo.length);
    const Vector6d ul = transformation(geo.c, geo.s) * element_vector(graph, result, e);
    g[e] = -ul.dot(dkl * ul);
  }
  return g;
}

std::vector<double> size_volume_gradient(const FrameGraph& graph) { return lengths_of(graph); }

std::vector<int> layout_nodes(const FrameGraph& graph) {
  std::vector<int> out;
  for (int v = 0; v < graph.num_nodes(); ++v)
    if (!graph.nodes[v].tagged()) out.push_back(v);
  return out;
}

std::vector<double> layout_gradient(const FrameGraph& graph, const FrameResult& result,
                                    std::span<const double> areas, double youngs) {
  const auto nodes = layout_nodes(graph);
  std::vector<int> slot(graph.nodes.size(), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) slot[nodes[k]] = static_cast<int>(k);
  std::vector<double> grad(2 * nodes.size(), 0.0);

  for (int e = 0; e < graph.num_edges(); ++e) {
    const int ends[2] = {graph.edges[e].n1, graph.edges[e].n2};
    if (slot[ends[0]] < 0 && slot[ends[1]] < 0) continue;
    const auto geo = member_geometry(graph, e);
    const double l = geo.length, c = geo.c, s = geo.s;
    const double inertia = solid_circle_inertia(areas[e]);
    const Matrix6d kl = local_stiffness(youngs, areas[e], inertia, l);
    const Matrix6d dkl = local_stiffness_length_derivative(youngs, areas[e], inertia, l);
    const Matrix6d t = transformation(c, s);
    const Vector6d ue = element_vector(graph, result, e);
    const Vector6d ul = t * ue;
    const Vector6d klul = kl * ul;

    for (int end = 0; end < 2; ++end) {
      if (slot[ends[end]] < 0) continue;
      const double sign = end == 0 ? 1.0 : -1.0;  // node 1 derivatives, negated for node 2
      // d/dx and d/dy of (c, s, L) at the first node.
      const double dcdx = -(1.0 - c * c) / l, dsdx = c * s / l, dldx = -c;
      const double dcdy = c * s / l, dsdy = -(1.0 - s * s) / l, dldy = -s;
      const double d[2][3] = {{dcdx, dsdx, dldx}, {dcdy, dsdy, dldy}};
      for (int axis = 0; axis < 2; ++axis) {
        const Matrix6d dt = transformation_derivative(sign * d[axis][0], sign * d[axis][1]);
        const double dl = sign * d[axis][2];
        const Vector6d dtu = dt * ue;
        // u^T (dT^T Kl T + T^T dKl T + T^T Kl dT) u
        const double quad = 2.0 * dtu.dot(klul) + dl * ul.dot(dkl * ul);
        grad[2 * slot[ends[end]] + axis] -= quad;
      }
    }
  }
  return grad;
}

std::vector<double> layout_volume_gradient(const FrameGraph& graph, std::span<const double> areas) {
  const auto nodes = layout_nodes(graph);
  std::vector<int> slot(graph.nodes.size(), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) slot[nodes[k]] = static_cast<int>(k);
  std::vector<double> grad(2 * nodes.size(), 0.0);
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto geo = member_geometry(graph, e);
    const int n1 = graph.edges[e].n1, n2 = graph.edges[e].n2;
    if (slot[n1] >= 0) {
      grad[2 * slot[n1]] -= areas[e] * geo.c;
      grad[2 * slot[n1] + 1] -= areas[e] * geo.s;
    }
    if (slot[n2] >= 0) {
      grad[2 * slot[n2]] += areas[e] * geo.c;
      grad[2 * slot[n2] + 1] += areas[e] * geo.s;
    }
  }
  return grad;
}

void restore_volume(std::vector<double>& areas, std::span<const double> lengths, double budget,
                    double a_min, double a_max) {
  const std::size_t n = areas.size();
  std::vector<char> pinned(n, 0);
  for (std::size_t pass = 0; pass <= n; ++pass) {
    double fixed = 0.0, scalable = 0.0;
    for (std::size_t i = 0; i < n; ++i) (pinned[i] ? fixed : scalable) += areas[i] * lengths[i];
    if (scalable <= 0.0) break;
    const double factor = (budget - fixed) / scalable;
    if (!(factor > 0.0)) break;
    bool clamped = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) continue;
      const double a = areas[i] * factor;
      if (a < a_min || a > a_max) {
        areas[i] = std::clamp(a, a_min, a_max);
        pinned[i] = 1;
        clamped = true;
      } else {
        areas[i] = a;
      }
    }
    if (!clamped) return;
  }
  const double v = volume_of(areas, lengths);
  if (std::abs(v - budget) > 1e-9 * budget)
    throw Error("infeasible bounds: member volume cannot match the budget within the area bounds");
}

double initial_area(const FrameGraph& graph, const DesignProblem& problem) {
  const double total = graph.total_length();
  if (!(total > 0)) throw Error("frame has zero total member length");
  return problem.volume_budget() / total;
}

namespace {

struct Driver {
  const DesignProblem& p;
  FrameGraph g;
  FrameOptResult& out;
  double budget;

  FrameResult analyse(const std::vector<double>& areas, int stage) {
    try {
      return solve_frame(g, areas, p.youngs_solid);
    } catch (const Error& e) {
      std::ostringstream dump;
      dump << "frame stage " << stage << ": " << e.what() << "; areas [";
      for (std::size_t i = 0; i < areas.size(); ++i) dump << (i ? ", " : "") << areas[i];
      dump << "]";
      throw SolverError(dump.str());
    }
  }

  double size_stage(int stage) {
    const int m = g.num_edges();
    std::vector<double> a = areas_of(g);
    const auto lengths = lengths_of(g);
    Mma mma(std::vector<double>(m, p.area_bounds.min), std::vector<double>(m, p.area_bounds.max));
    FrameResult r = analyse(a, stage);
    double c0 = r.compliance, c = c0;
    double best_c = c;
    std::vector<double> best_a = a;
    for (int it = 1; it <= p.max_iter_mma; ++it) {
      auto dc = size_gradient(g, r, a, p.youngs_solid);
      for (double& v : dc) v /= c0;
      std::vector<double> dv(lengths);
      for (double& v : dv) v /= budget;
      const double gval = volume_of(a, lengths) / budget - 1.0;
      auto next = mma.step(a, c / c0, dc, gval, dv);
      restore_volume(next, lengths, budget, p.area_bounds.min, p.area_bounds.max);
      double change = 0.0;
      for (int i = 0; i < m; ++i) change = std::max(change, std::abs(next[i] - a[i]) / (p.area_bounds.max - p.area_bounds.min));
      a = std::move(next);
      r = analyse(a, stage);
      const double prev = c;
      c = r.compliance;
      out.trace.push_back({stage, "size", it, c, volume_of(a, lengths), change});
      if (c < best_c) {
        best_c = c;
        best_a = a;
      }
      if (std::abs(prev - c) / c < p.frame_tolerances.size) break;
    }
    // MMA is not monotone; the stage hands on its best iterate.
    set_areas(g, best_a);
    return best_c;
  }

  double layout_stage(int stage) {
    std::vector<double> a = areas_of(g);
    const auto nodes = layout_nodes(g);
    if (nodes.empty()) return analyse(a, stage).compliance;
    const std::size_t n = 2 * nodes.size();
    std::vector<double> lo(n), hi(n), s(n);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto& node = g.nodes[nodes[k]];
      s[2 * k] = node.x;
      s[2 * k + 1] = node.y;
      lo[2 * k] = 0.0;
      hi[2 * k] = p.width();
      lo[2 * k + 1] = 0.0;
      hi[2 * k + 1] = p.height();
      if (p.layout_box > 0) {
        lo[2 * k] = std::max(lo[2 * k], node.x - p.layout_box);
        hi[2 * k] = std::min(hi[2 * k], node.x + p.layout_box);
        lo[2 * k + 1] = std::max(lo[2 * k + 1], node.y - p.layout_box);
        hi[2 * k + 1] = std::min(hi[2 * k + 1], node.y + p.layout_box);
      }
      for (std::size_t j : {2 * k, 2 * k + 1}) {
        s[j] = std::clamp(s[j], lo[j], hi[j]);
        if (!(hi[j] > lo[j])) hi[j] = lo[j] + 1e-6;
      }
    }
    MmaOptions mo;
    mo.move_limit = p.layout_move;
    Mma mma(lo, hi, mo);

    const auto place = [&](const std::vector<double>& x) {
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        g.nodes[nodes[k]].x = x[2 * k];
        g.nodes[nodes[k]].y = x[2 * k + 1];
        g.nodes[nodes[k]].pixel = -1;
      }
    };

    FrameResult r = analyse(a, stage);
    const double c0 = r.compliance;
    double c = c0;
    double best_c = c;
    std::vector<double> best_s = s, best_a = a;
    for (int it = 1; it <= p.max_iter_mma; ++it) {
      auto dc = layout_gradient(g, r, a, p.youngs_solid);
      for (double& v : dc) v /= c0;
      auto dv = layout_volume_gradient(g, a);
      for (double& v : dv) v /= budget;
      const double gval = g.volume() / budget - 1.0;
      auto next = mma.step(s, c / c0, dc, gval, dv);
      place(next);
      double change = 0.0;
      for (std::size_t j = 0; j < n; ++j) change = std::max(change, std::abs(next[j] - s[j]) / (hi[j] - lo[j]));
      s = std::move(next);
      const bool collapsing = shortest_member(g) < 0.5 * p.h;
      if (collapsing) {
        // Too short to analyse reliably; stop here and let the merge handle it.
        out.log.push_back("stage " + std::to_string(stage) + ": member shorter than half an element, layout stage ended early");
        break;
      }
      restore_volume(a, lengths_of(g), budget, p.area_bounds.min, p.area_bounds.max);
      r = analyse(a, stage);
      const double prev = c;
      c = r.compliance;
      out.trace.push_back({stage, "layout", it, c, volume_of(a, lengths_of(g)), change});
      if (c < best_c) {
        best_c = c;
        best_s = s;
        best_a = a;
      }
      if (std::abs(prev - c) / c < p.frame_tolerances.layout) break;
    }
    place(best_s);
    set_areas(g, best_a);
    c = best_c;

    // Merge members that became short relative to their neighbours.
    const int before = g.num_edges();
    std::vector<std::string> warnings;
    FrameGraph merged = contract_short_edges(g, p.merge_ratio, &warnings, 0.5 * p.h);
    for (auto& w : warnings) out.log.push_back("stage " + std::to_string(stage) + ": " + w);
    if (merged.num_edges() != before) {
      g = std::move(merged);
      auto am = areas_of(g);
      restore_volume(am, lengths_of(g), budget, p.area_bounds.min, p.area_bounds.max);
      set_areas(g, am);
      const double cm = analyse(am, stage).compliance;
      out.log.push_back("stage " + std::to_string(stage) + ": merged " + std::to_string(before - g.num_edges()) +
                        " member(s), compliance " + std::to_string(c) + " -> " + std::to_string(cm));
      c = cm;
    }
    return c;
  }
};

}  // namespace

FrameOptResult run_sequential(const FrameGraph& graph, const DesignProblem& problem) {
  check_graph(graph);
  FrameOptResult out;
  Driver d{problem, graph, out, problem.volume_budget()};
  const double a0 = initial_area(graph, problem);
  if (a0 < problem.area_bounds.min || a0 > problem.area_bounds.max)
    throw Error("infeasible bounds: uniform start area " + std::to_string(a0) + " mm^2 lies outside the area bounds");
  for (auto& e : d.g.edges) e.area = a0;

  out.initial_compliance = d.analyse(areas_of(d.g), 0).compliance;
  out.stage_compliance.push_back(out.initial_compliance);
  out.trace.push_back({0, "initial", 0, out.initial_compliance, d.g.volume(), 0.0});

  double prev = out.initial_compliance;
  for (int stage = 1; stage <= problem.max_stages; ++stage) {
    const bool size = stage % 2 == 1;
    const double c = size ? d.size_stage(stage) : d.layout_stage(stage);
    out.stage_compliance.push_back(c);
    out.stages = stage;
    if (c > prev * (1.0 + 1e-12))
      out.log.push_back("stage " + std::to_string(stage) + ": compliance rose from " + std::to_string(prev) +
                        " to " + std::to_string(c));
    const bool small = std::abs(prev - c) / c < problem.frame_tolerances.frame;
    prev = c;
    if (small) {
      out.converged = true;
      break;
    }
  }
  out.graph = std::move(d.g);
  out.final_compliance = prev;
  return out;
}

void write_frame_trace_csv(const std::filesystem::path& path, const std::vector<FrameTraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "stage,kind,iteration,compliance,volume,max_change\n" << std::setprecision(12);
  for (const auto& r : trace)
    out << r.stage << ',' << r.kind << ',' << r.iteration << ',' << r.compliance << ',' << r.volume << ','
        << r.max_change << '\n';
}

}  // namespace topoframe
