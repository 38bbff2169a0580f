#include "topoframe/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"
#include "topoframe/error.hpp"

namespace topoframe {

using nlohmann::json;

double FrameGraph::length(int e) const {
  const auto& a = nodes[edges[e].n1];
  const auto& b = nodes[edges[e].n2];
  return std::hypot(b.x - a.x, b.y - a.y);
}

std::vector<int> FrameGraph::degrees() const {
  std::vector<int> d(nodes.size(), 0);
  for (const auto& e : edges) {
    ++d[e.n1];
    ++d[e.n2];
  }
  return d;
}

std::vector<std::vector<int>> FrameGraph::incidence() const {
  std::vector<std::vector<int>> inc(nodes.size());
  for (int e = 0; e < num_edges(); ++e) {
    inc[edges[e].n1].push_back(e);
    inc[edges[e].n2].push_back(e);
  }
  return inc;
}

double FrameGraph::total_length() const {
  double s = 0.0;
  for (int e = 0; e < num_edges(); ++e) s += length(e);
  return s;
}

double FrameGraph::volume() const {
  double s = 0.0;
  for (int e = 0; e < num_edges(); ++e) s += edges[e].area * length(e);
  return s;
}

namespace {

// Component label per node (-1 never happens after the sweep).
std::vector<int> components(const FrameGraph& g) {
  const auto inc = g.incidence();
  std::vector<int> label(g.nodes.size(), -1);
  int next = 0;
  for (int s = 0; s < g.num_nodes(); ++s) {
    if (label[s] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    label[s] = next;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int e : inc[v]) {
        const int w = g.edges[e].other(v);
        if (label[w] < 0) {
          label[w] = next;
          q.push(w);
        }
      }
    }
    ++next;
  }
  return label;
}

std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Keeps only nodes flagged in `keep`, renumbering nodes and edges.
FrameGraph subgraph(const FrameGraph& g, const std::vector<char>& keep) {
  FrameGraph out;
  out.merge_ratio = g.merge_ratio;
  out.angle_limit = g.angle_limit;
  std::vector<int> map(g.nodes.size(), -1);
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (!keep[v]) continue;
    map[v] = out.num_nodes();
    out.nodes.push_back(g.nodes[v]);
  }
  for (const auto& e : g.edges) {
    if (map[e.n1] < 0 || map[e.n2] < 0) continue;
    GraphEdge ne = e;
    ne.n1 = map[e.n1];
    ne.n2 = map[e.n2];
    out.edges.push_back(ne);
  }
  return out;
}

}  // namespace

bool is_connected(const FrameGraph& graph) {
  if (graph.nodes.empty()) return true;
  const auto label = components(graph);
  return std::all_of(label.begin(), label.end(), [](int l) { return l == 0; });
}

void check_graph(const FrameGraph& g) {
  std::set<std::pair<int, int>> seen;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges[e];
    if (ed.n1 < 0 || ed.n2 < 0 || ed.n1 >= g.num_nodes() || ed.n2 >= g.num_nodes())
      throw Error("edge " + std::to_string(e) + " references a missing node");
    if (ed.n1 == ed.n2) throw Error("edge " + std::to_string(e) + " is a self-loop");
    if (!seen.insert(key(ed.n1, ed.n2)).second)
      throw Error("edge " + std::to_string(e) + " duplicates another edge");
  }
  if (!is_connected(g)) throw Error("frame graph is not connected");
  const bool has_load = std::any_of(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) { return n.loaded; });
  const bool has_support = std::any_of(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) { return n.is_support(); });
  if (has_load && !has_support) throw Error("load node is not connected to any support");
}

FrameGraph compact(const FrameGraph& graph) {
  const auto deg = graph.degrees();
  std::vector<char> keep(graph.nodes.size(), 0);
  for (int v = 0; v < graph.num_nodes(); ++v)
    keep[v] = deg[v] > 0 || graph.nodes[v].tagged() || graph.edges.empty();
  return subgraph(graph, keep);
}

FrameGraph build_graph(const Skeleton& skeleton, const DesignProblem& problem) {
  const BinaryRaster& img = skeleton.raster;
  if (img.width != problem.nx || img.height != problem.ny)
    throw ValidationError("skeleton size does not match the problem grid");
  const int w = img.width, h = img.height;
  const int n = w * h;

  // Pixel graph: 8-adjacency without diagonal shortcuts across a set 4-neighbour.
  const auto pixel_neighbors = [&](int i) {
    std::vector<int> out;
    const int c = i % w, r = i / w;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if ((dc == 0 && dr == 0) || !img.get(c + dc, r + dr)) continue;
        if (dc != 0 && dr != 0 && (img.get(c + dc, r) || img.get(c, r + dr))) continue;
        out.push_back(img.index(c + dc, r + dr));
      }
    }
    return out;
  };

  std::map<int, SupportDofs> support_at;
  for (const auto& s : problem.supports) {
    for (int p : {s.pixel, s.to_pixel.value_or(s.pixel)}) {
      auto& d = support_at[p];
      d.x = d.x || s.dofs.x;
      d.y = d.y || s.dofs.y;
      d.rz = d.rz || s.dofs.rz;
    }
  }
  std::map<int, std::pair<double, double>> load_at;
  for (const auto& l : problem.loads) {
    auto& f = load_at[l.pixel];
    f.first += l.fx;
    f.second += l.fy;
  }

  std::vector<char> featured(n, 0);
  std::vector<int> node_of(n, -1);
  FrameGraph g;
  g.merge_ratio = problem.merge_ratio;
  g.angle_limit = problem.angle_limit;
  for (int i = 0; i < n; ++i) {
    if (!img.bits[i]) continue;
    const PixelType t = skeleton.types.empty() ? PixelType::Regular : skeleton.types[i];
    const bool tag = support_at.count(i) || load_at.count(i);
    featured[i] = t == PixelType::End || t == PixelType::Joint || tag || pixel_neighbors(i).size() != 2;
    if (!featured[i]) continue;
    GraphNode node;
    node.x = pixel_x(i % w, problem.h);
    node.y = pixel_y(i / w, problem.ny, problem.h);
    node.pixel = i;
    if (auto it = support_at.find(i); it != support_at.end()) node.support = it->second;
    if (auto it = load_at.find(i); it != load_at.end()) {
      node.loaded = true;
      node.fx = it->second.first;
      node.fy = it->second.second;
    }
    node_of[i] = g.num_nodes();
    g.nodes.push_back(node);
  }
  for (const auto& [p, d] : support_at)
    if (!img.bits[p]) throw Error("tagged support pixel " + std::to_string(p) + " missing from the skeleton");
  for (const auto& [p, f] : load_at)
    if (!img.bits[p]) throw Error("tagged load pixel " + std::to_string(p) + " missing from the skeleton");
  if (g.nodes.empty()) throw Error("no structure: skeleton has no featured pixels");

  const auto add_pixel_node = [&](int pixel) {
    GraphNode node;
    node.x = pixel_x(pixel % w, problem.h);
    node.y = pixel_y(pixel / w, problem.ny, problem.h);
    node.pixel = pixel;
    node_of[pixel] = g.num_nodes();
    g.nodes.push_back(node);
    return node_of[pixel];
  };

  std::set<std::pair<int, int>> pairs;
  const auto add_edge = [&](int a, int b, int chain) {
    g.edges.push_back(GraphEdge{a, b, chain, 0.0, {}});
    pairs.insert(key(a, b));
  };

  std::vector<char> visited(n, 0);
  for (int f = 0; f < n; ++f) {
    if (!featured[f]) continue;
    for (int q : pixel_neighbors(f)) {
      if (featured[q]) {
        if (f < q && !pairs.count(key(node_of[f], node_of[q]))) add_edge(node_of[f], node_of[q], 1);
        continue;
      }
      if (visited[q]) continue;
      std::vector<int> path;
      int prev = f, cur = q;
      while (!featured[cur]) {
        visited[cur] = 1;
        path.push_back(cur);
        const auto nb = pixel_neighbors(cur);
        const int next = nb[0] == prev ? nb[1] : nb[0];
        prev = cur;
        cur = next;
      }
      const int a = node_of[f], b = node_of[cur];
      const int k = static_cast<int>(path.size());
      if (a == b) {
        // Closed loop through one featured pixel: split into three members.
        if (k < 2) continue;
        const int m1 = add_pixel_node(path[k / 3]);
        const int m2 = add_pixel_node(path[(2 * k) / 3]);
        add_edge(a, m1, k / 3 + 1);
        add_edge(m1, m2, (2 * k) / 3 - k / 3);
        add_edge(m2, b, k - (2 * k) / 3);
      } else if (pairs.count(key(a, b))) {
        const int m = add_pixel_node(path[k / 2]);
        add_edge(a, m, k / 2 + 1);
        add_edge(m, b, k - k / 2);
      } else {
        add_edge(a, b, k + 1);
      }
    }
  }

  // Keep the components that carry loads (or supports when there are none).
  const auto label = components(g);
  const bool any_load = std::any_of(g.nodes.begin(), g.nodes.end(), [](const GraphNode& v) { return v.loaded; });
  std::set<int> kept;
  for (int v = 0; v < g.num_nodes(); ++v)
    if (any_load ? g.nodes[v].loaded : g.nodes[v].is_support()) kept.insert(label[v]);
  for (int comp : kept) {
    bool supported = false;
    for (int v = 0; v < g.num_nodes(); ++v) supported |= label[v] == comp && g.nodes[v].is_support();
    if (!supported) {
      for (int v = 0; v < g.num_nodes(); ++v)
        if (label[v] == comp && g.nodes[v].loaded)
          throw Error("load at pixel " + std::to_string(g.nodes[v].pixel) +
                      " is not connected to any support in the skeleton");
    }
  }
  std::vector<char> keep(g.nodes.size(), 0);
  for (int v = 0; v < g.num_nodes(); ++v) keep[v] = kept.count(label[v]) > 0;
  g = subgraph(g, keep);
  if (g.edges.empty()) throw Error("no structure: skeleton has no members");
  return g;
}

FrameGraph prune(const FrameGraph& graph) {
  FrameGraph g = graph;
  std::vector<char> alive(g.edges.size(), 1);
  std::vector<int> deg = g.degrees();
  const auto inc = g.incidence();
  std::queue<int> leaves;
  for (int v = 0; v < g.num_nodes(); ++v)
    if (deg[v] == 1 && !g.nodes[v].tagged()) leaves.push(v);
  while (!leaves.empty()) {
    const int v = leaves.front();
    leaves.pop();
    if (deg[v] != 1) continue;
    for (int e : inc[v]) {
      if (!alive[e]) continue;
      alive[e] = 0;
      const int w = g.edges[e].other(v);
      --deg[v];
      --deg[w];
      if (deg[w] == 1 && !g.nodes[w].tagged()) leaves.push(w);
    }
  }
  std::vector<GraphEdge> edges;
  for (int e = 0; e < g.num_edges(); ++e)
    if (alive[e]) edges.push_back(g.edges[e]);
  g.edges = std::move(edges);
  return compact(g);
}

FrameGraph contract_short_edges(const FrameGraph& graph, double ratio, std::vector<std::string>* warnings,
                                double min_length) {
  if (!(ratio >= 0.0 && ratio < 0.5)) throw ValidationError("merge ratio must lie in [0, 0.5)");
  FrameGraph g = graph;
  std::set<std::pair<int, int>> blocked;
  for (;;) {
    const auto inc = g.incidence();
    int best = -1;
    double best_len = 0.0;
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto& ed = g.edges[e];
      if (blocked.count(key(ed.n1, ed.n2))) continue;
      // Members sharing a node, taken at the endpoint where they total more.
      double t1 = 0.0, t2 = 0.0;
      for (int f : inc[ed.n1]) t1 += g.length(f);
      for (int f : inc[ed.n2]) t2 += g.length(f);
      const double total = std::max(t1, t2);
      const double len = g.length(e);
      if ((len < ratio * total || len < min_length) && (best < 0 || len < best_len)) {
        best = e;
        best_len = len;
      }
    }
    if (best < 0) break;

    const int a = g.edges[best].n1, b = g.edges[best].n2;
    auto& na = g.nodes[a];
    auto& nb = g.nodes[b];
    if (na.tagged() && nb.tagged()) {
      blocked.insert(key(a, b));
      if (warnings) {
        std::ostringstream msg;
        msg << "edge between tagged nodes (" << na.x << ", " << na.y << ") and (" << nb.x << ", " << nb.y
            << ") is shorter than the merge criterion but was kept";
        warnings->push_back(msg.str());
      }
      continue;
    }
    int keep = a, drop = b;
    if (nb.tagged()) std::swap(keep, drop);
    else if (!na.tagged()) {
      const int da = static_cast<int>(inc[a].size()), db = static_cast<int>(inc[b].size());
      if (db > da) std::swap(keep, drop);
      else if (da == db) {
        na.x = 0.5 * (na.x + nb.x);
        na.y = 0.5 * (na.y + nb.y);
        na.pixel = -1;
      }
    }

    // Redirect the dropped node's members and merge any parallel pairs.
    std::map<int, int> by_other;  // neighbour of `keep` -> edge index in `out`
    std::vector<GraphEdge> out;
    for (int e = 0; e < g.num_edges(); ++e) {
      if (e == best) continue;
      GraphEdge ed = g.edges[e];
      if (ed.n1 == drop) ed.n1 = keep;
      if (ed.n2 == drop) ed.n2 = keep;
      if (ed.n1 == ed.n2) continue;
      if (ed.n1 == keep || ed.n2 == keep) {
        const int other = ed.other(keep);
        if (auto it = by_other.find(other); it != by_other.end()) {
          auto& kept = out[it->second];
          kept.area += ed.area;
          kept.chain = std::min(kept.chain, ed.chain);
          continue;
        }
        by_other[other] = static_cast<int>(out.size());
      }
      out.push_back(ed);
    }
    g.edges = std::move(out);
  }
  return compact(g);
}

namespace {

double deviation_deg(double ux, double uy, double vx, double vy) {
  // Angle between directions u and -v, i.e. deviation from a straight pass.
  const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
  if (nu == 0 || nv == 0) return 180.0;
  const double c = std::clamp(-(ux * vx + uy * vy) / (nu * nv), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double line_angle_deg(double ux, double uy, double lx, double ly) {
  const double nu = std::hypot(ux, uy), nl = std::hypot(lx, ly);
  if (nu == 0 || nl == 0) return 0.0;
  const double c = std::clamp((ux * lx + uy * ly) / (nu * nl), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

void straighten(FrameGraph& g, const std::vector<int>& path, std::size_t lo, std::size_t hi, double limit) {
  if (hi - lo < 2) return;
  const auto& a = g.nodes[path[lo]];
  const auto& b = g.nodes[path[hi]];
  const double lx = b.x - a.x, ly = b.y - a.y;
  const double len = std::hypot(lx, ly);
  if (len == 0.0) return;
  double worst = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    const auto& p = g.nodes[path[k]];
    const auto& q = g.nodes[path[k + 1]];
    worst = std::max(worst, line_angle_deg(q.x - p.x, q.y - p.y, lx, ly));
  }
  if (worst < limit) {
    for (std::size_t k = lo + 1; k < hi; ++k) {
      auto& p = g.nodes[path[k]];
      if (p.tagged()) continue;
      const double t = ((p.x - a.x) * lx + (p.y - a.y) * ly) / (len * len);
      p.x = a.x + t * lx;
      p.y = a.y + t * ly;
      p.pixel = -1;
    }
    return;
  }
  // Split at the node farthest from the chord.
  std::size_t split = lo + 1;
  double far = -1.0;
  for (std::size_t k = lo + 1; k < hi; ++k) {
    const auto& p = g.nodes[path[k]];
    const double d = std::abs((p.x - a.x) * ly - (p.y - a.y) * lx) / len;
    if (d > far) {
      far = d;
      split = k;
    }
  }
  straighten(g, path, lo, split, limit);
  straighten(g, path, split, hi, limit);
}

}  // namespace

FrameGraph snap_angles(const FrameGraph& graph, double angle_limit_deg) {
  if (angle_limit_deg < 0) throw ValidationError("angle limit must be non-negative");
  FrameGraph g = graph;
  if (angle_limit_deg == 0.0) return g;
  const auto inc = g.incidence();

  // Pass-through pair per node: the two incident members closest to collinear.
  std::vector<std::pair<int, int>> pass(g.nodes.size(), {-1, -1});
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (g.nodes[v].tagged() || inc[v].size() < 2) continue;
    double best = angle_limit_deg;
    for (std::size_t i = 0; i < inc[v].size(); ++i) {
      for (std::size_t j = i + 1; j < inc[v].size(); ++j) {
        const auto& p = g.nodes[g.edges[inc[v][i]].other(v)];
        const auto& q = g.nodes[g.edges[inc[v][j]].other(v)];
        const auto& c = g.nodes[v];
        const double dev = deviation_deg(p.x - c.x, p.y - c.y, q.x - c.x, q.y - c.y);
        if (dev < best) {
          best = dev;
          pass[v] = {inc[v][i], inc[v][j]};
        }
      }
    }
  }
  const auto partner = [&](int v, int e) {
    if (pass[v].first == e) return pass[v].second;
    if (pass[v].second == e) return pass[v].first;
    return -1;
  };

  std::vector<char> used(g.edges.size(), 0);
  for (int e0 = 0; e0 < g.num_edges(); ++e0) {
    if (used[e0]) continue;
    used[e0] = 1;
    // Walk both ways from e0 through pass-through nodes.
    std::vector<int> forward{g.edges[e0].n1, g.edges[e0].n2};
    bool closed = false;
    for (int dir = 0; dir < 2 && !closed; ++dir) {
      std::vector<int>& seq = forward;
      int e = e0;
      int v = dir == 0 ? seq.back() : seq.front();
      for (;;) {
        const int next = partner(v, e);
        if (next < 0) break;
        if (used[next]) {
          closed = next == e0;
          break;
        }
        used[next] = 1;
        const int w = g.edges[next].other(v);
        if (dir == 0) seq.push_back(w);
        else seq.insert(seq.begin(), w);
        e = next;
        v = w;
      }
    }
    if (closed || forward.size() < 3) continue;
    straighten(g, forward, 0, forward.size() - 1, angle_limit_deg);
  }
  return g;
}

std::string graph_to_json(const FrameGraph& g) {
  json doc;
  doc["merge_ratio"] = g.merge_ratio;
  doc["angle_limit"] = g.angle_limit;
  json nodes = json::array();
  for (int v = 0; v < g.num_nodes(); ++v) {
    const auto& n = g.nodes[v];
    json jn{{"id", v}, {"x", n.x}, {"y", n.y}};
    std::string tag = "free";
    if (n.is_support() && n.loaded) tag = "support+load";
    else if (n.is_support()) tag = "support";
    else if (n.loaded) tag = "load";
    jn["tag"] = tag;
    if (n.is_support()) {
      json d = json::array();
      if (n.support.x) d.push_back("x");
      if (n.support.y) d.push_back("y");
      if (n.support.rz) d.push_back("rz");
      jn["dofs"] = d;
    }
    if (n.loaded) jn["load"] = {n.fx, n.fy};
    if (n.pixel >= 0) jn["pixel"] = n.pixel;
    nodes.push_back(jn);
  }
  json edges = json::array();
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges[e];
    json je{{"id", e}, {"n1", ed.n1}, {"n2", ed.n2}, {"area", ed.area}, {"chain", ed.chain}};
    if (!ed.section.empty()) je["section"] = ed.section;
    edges.push_back(je);
  }
  doc["nodes"] = nodes;
  doc["edges"] = edges;
  return doc.dump(2) + "\n";
}

FrameGraph graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph document: ") + e.what());
  }
  FrameGraph g;
  try {
    g.merge_ratio = doc.value("merge_ratio", 0.1);
    g.angle_limit = doc.value("angle_limit", 10.0);
    const auto& nodes = doc.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& jn = nodes[i];
      if (jn.contains("id") && jn.at("id").get<int>() != static_cast<int>(i))
        throw ParseError("graph node ids must be 0..n-1 in order");
      GraphNode n;
      n.x = jn.at("x").get<double>();
      n.y = jn.at("y").get<double>();
      if (jn.contains("dofs")) {
        for (const auto& d : jn.at("dofs")) {
          const auto s = d.get<std::string>();
          if (s == "x") n.support.x = true;
          else if (s == "y") n.support.y = true;
          else if (s == "rz") n.support.rz = true;
          else throw ParseError("unknown dof '" + s + "' in graph node " + std::to_string(i));
        }
      }
      if (jn.contains("load")) {
        n.loaded = true;
        n.fx = jn.at("load").at(0).get<double>();
        n.fy = jn.at("load").at(1).get<double>();
      }
      n.pixel = jn.value("pixel", -1);
      g.nodes.push_back(n);
    }
    const auto& edges = doc.at("edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& je = edges[i];
      GraphEdge e;
      e.n1 = je.at("n1").get<int>();
      e.n2 = je.at("n2").get<int>();
      e.area = je.value("area", 0.0);
      e.chain = je.value("chain", 0);
      e.section = je.value("section", std::string());
      g.edges.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph document: ") + e.what());
  }
  for (const auto& e : g.edges)
    if (e.n1 < 0 || e.n2 < 0 || e.n1 >= g.num_nodes() || e.n2 >= g.num_nodes())
      throw ParseError("graph document: edge references a missing node");
  return g;
}

void save_graph(const FrameGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << graph_to_json(graph);
  if (!out) throw Error("write failed for " + path.string());
}

FrameGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

}  // namespace topoframe
