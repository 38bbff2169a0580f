#include "topoframe/cadgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "topoframe/error.hpp"

namespace topoframe {

namespace {

constexpr double kPi = std::numbers::pi;

// Any unit vector orthogonal to a.
Eigen::Vector3d orthogonal(const Eigen::Vector3d& a) {
  const Eigen::Vector3d ref = std::abs(a.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  return a.cross(ref).normalized();
}

void add_cylinder(TriMesh& mesh, const Cylinder& c, int n) {
  const int base = static_cast<int>(mesh.vertices.size());
  const Eigen::Vector3d axis = (c.p2 - c.p1).normalized();
  const Eigen::Vector3d u = orthogonal(axis);
  const Eigen::Vector3d v = axis.cross(u);
  for (int end = 0; end < 2; ++end) {
    const Eigen::Vector3d& p = end == 0 ? c.p1 : c.p2;
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * kPi * k / n;
      mesh.vertices.push_back(p + c.radius * (std::cos(a) * u + std::sin(a) * v));
    }
  }
  const int c1 = base + 2 * n, c2 = c1 + 1;
  mesh.vertices.push_back(c.p1);
  mesh.vertices.push_back(c.p2);
  for (int k = 0; k < n; ++k) {
    const int k1 = (k + 1) % n;
    const int a0 = base + k, a1 = base + k1, b0 = base + n + k, b1 = base + n + k1;
    // u, v, axis is right-handed, so counter-clockwise around the axis
    mesh.triangles.push_back({a0, a1, b1});
    mesh.triangles.push_back({a0, b1, b0});
    mesh.triangles.push_back({c1, a1, a0});
    mesh.triangles.push_back({c2, b0, b1});
  }
}

void add_sphere(TriMesh& mesh, const Sphere& s, int slices) {
  const int stacks = std::max(4, slices / 2);
  const int base = static_cast<int>(mesh.vertices.size());
  const int south = base, north = base + 1;
  mesh.vertices.push_back(s.center - Eigen::Vector3d(0, 0, s.radius));
  mesh.vertices.push_back(s.center + Eigen::Vector3d(0, 0, s.radius));
  // rings j = 1 .. stacks-1 from south to north
  for (int j = 1; j < stacks; ++j) {
    const double phi = -kPi / 2 + kPi * j / stacks;
    for (int k = 0; k < slices; ++k) {
      const double th = 2.0 * kPi * k / slices;
      mesh.vertices.push_back(s.center +
                              s.radius * Eigen::Vector3d(std::cos(phi) * std::cos(th), std::cos(phi) * std::sin(th),
                                                         std::sin(phi)));
    }
  }
  const auto ring = [&](int j, int k) { return base + 2 + (j - 1) * slices + (k % slices); };
  for (int k = 0; k < slices; ++k) mesh.triangles.push_back({south, ring(1, k + 1), ring(1, k)});
  for (int j = 1; j + 1 < stacks; ++j) {
    for (int k = 0; k < slices; ++k) {
      mesh.triangles.push_back({ring(j, k), ring(j, k + 1), ring(j + 1, k + 1)});
      mesh.triangles.push_back({ring(j, k), ring(j + 1, k + 1), ring(j + 1, k)});
    }
  }
  for (int k = 0; k < slices; ++k) mesh.triangles.push_back({north, ring(stacks - 1, k), ring(stacks - 1, k + 1)});
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace

CsgTree build_csg(const FrameGraph& graph, const SectionCatalog* catalog) {
  if (graph.edges.empty()) throw GeometryError("cannot build a solid model of an empty frame");
  CsgTree tree;
  std::vector<double> node_radius(graph.nodes.size(), 0.0);
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto& ed = graph.edges[e];
    const auto& a = graph.nodes[ed.n1];
    const auto& b = graph.nodes[ed.n2];
    if (std::hypot(b.x - a.x, b.y - a.y) <= 0.0)
      throw GeometryError("member " + std::to_string(e + 1) + " has zero length");
    Cylinder c;
    c.p1 = Eigen::Vector3d(a.x, a.y, 0.0);
    c.p2 = Eigen::Vector3d(b.x, b.y, 0.0);
    c.member = e + 1;
    const Section* sec = catalog && !ed.section.empty() ? find_section(*catalog, ed.section) : nullptr;
    if (sec) {
      c.radius = sec->d / 2.0;
      c.section = sec->designation;
      c.wall = sec->t;
    } else {
      if (!(ed.area > 0.0)) throw GeometryError("member " + std::to_string(e + 1) + " has no positive area");
      c.radius = std::sqrt(ed.area / kPi);
    }
    node_radius[ed.n1] = std::max(node_radius[ed.n1], c.radius);
    node_radius[ed.n2] = std::max(node_radius[ed.n2], c.radius);
    tree.cylinders.push_back(c);
  }
  const auto deg = graph.degrees();
  for (int n = 0; n < graph.num_nodes(); ++n) {
    if (deg[n] < 2) continue;
    tree.spheres.push_back({Eigen::Vector3d(graph.nodes[n].x, graph.nodes[n].y, 0.0), node_radius[n], n});
  }
  return tree;
}

TriMesh tessellate(const CsgTree& tree, int segments) {
  if (segments < 8) throw ValidationError("tessellation needs at least 8 segments");
  TriMesh mesh;
  const auto open = [&](const std::string& name) {
    MeshGroup g;
    g.name = name;
    g.first_vertex = static_cast<int>(mesh.vertices.size());
    g.first_triangle = static_cast<int>(mesh.triangles.size());
    return g;
  };
  const auto close = [&](MeshGroup g) {
    g.vertex_count = static_cast<int>(mesh.vertices.size()) - g.first_vertex;
    g.triangle_count = static_cast<int>(mesh.triangles.size()) - g.first_triangle;
    mesh.groups.push_back(g);
  };
  for (const auto& c : tree.cylinders) {
    auto g = open("member_" + std::to_string(c.member));
    add_cylinder(mesh, c, segments);
    close(g);
  }
  for (const auto& s : tree.spheres) {
    auto g = open("joint_" + std::to_string(s.node));
    add_sphere(mesh, s, segments);
    close(g);
  }
  return mesh;
}

std::string csg_to_json(const CsgTree& tree) {
  using nlohmann::json;
  json prims = json::array();
  json children = json::array();
  int id = 0;
  for (const auto& c : tree.cylinders) {
    json p = {{"id", id},
              {"type", "cylinder"},
              {"member", c.member},
              {"p1", {c.p1.x(), c.p1.y(), c.p1.z()}},
              {"p2", {c.p2.x(), c.p2.y(), c.p2.z()}},
              {"radius", c.radius}};
    if (!c.section.empty()) {
      p["section"] = c.section;
      p["wall"] = c.wall;
    }
    prims.push_back(p);
    children.push_back(id++);
  }
  for (const auto& s : tree.spheres) {
    prims.push_back({{"id", id},
                     {"type", "sphere"},
                     {"node", s.node},
                     {"center", {s.center.x(), s.center.y(), s.center.z()}},
                     {"radius", s.radius}});
    children.push_back(id++);
  }
  json doc;
  doc["primitives"] = prims;
  doc["ops"] = json::array({{{"id", id}, {"type", "union"}, {"children", children}}});
  doc["root"] = id;
  return doc.dump(2) + "\n";
}

void write_stl(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::string header = "topoframe binary STL";
  header.resize(80, ' ');
  out.write(header.data(), 80);
  put_u32(out, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    Eigen::Vector3d n = (b - a).cross(c - a);
    if (n.norm() > 0) n.normalize();
    for (int i = 0; i < 3; ++i) put_f32(out, static_cast<float>(n[i]));
    for (const auto* p : {&a, &b, &c})
      for (int i = 0; i < 3; ++i) put_f32(out, static_cast<float>((*p)[i]));
    out.write("\0\0", 2);
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<StlTriangle> read_stl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 84) throw ParseError(path.string() + ": too short for binary STL");
  const std::uint32_t count = get_u32(bytes.data() + 80);
  if (bytes.size() != 84 + 50ull * count)
    throw ParseError(path.string() + ": size " + std::to_string(bytes.size()) + " does not match " +
                     std::to_string(count) + " triangles");
  std::vector<StlTriangle> tris(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const unsigned char* p = bytes.data() + 84 + 50ull * i;
    for (int k = 0; k < 3; ++k) tris[i].normal[k] = get_f32(p + 4 * k);
    for (int v = 0; v < 3; ++v)
      for (int k = 0; k < 3; ++k) tris[i].v[v][k] = get_f32(p + 12 + 12 * v + 4 * k);
  }
  return tris;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(9);
  for (const auto& g : mesh.groups) {
    out << "g " << g.name << "\n";
    for (int v = g.first_vertex; v < g.first_vertex + g.vertex_count; ++v)
      out << "v " << mesh.vertices[v].x() << " " << mesh.vertices[v].y() << " " << mesh.vertices[v].z() << "\n";
    for (int t = g.first_triangle; t < g.first_triangle + g.triangle_count; ++t) {
      const auto& tri = mesh.triangles[t];
      out << "f " << tri[0] + 1 << " " << tri[1] + 1 << " " << tri[2] + 1 << "\n";
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace topoframe
