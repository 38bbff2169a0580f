#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "json.hpp"
#include "topoframe/cadgen.hpp"
#include "topoframe/error.hpp"

using namespace topoframe;

namespace {

constexpr double kPi = std::numbers::pi;

FrameGraph two_members(double a1, double a2) {
  FrameGraph g;
  GraphNode a, b, c;
  a.support = {true, true, true};
  b.x = 500;
  c.x = 500;
  c.y = 400;
  c.loaded = true;
  c.fy = -1;
  g.nodes = {a, b, c};
  g.edges.push_back({0, 1, 50, a1, {}});
  g.edges.push_back({1, 2, 40, a2, {}});
  return g;
}

struct GroupTopology {
  int euler = 0;
  int unmatched = 0;  // directed edges with no reversed partner
  double volume = 0.0;
};

GroupTopology topology(const TriMesh& m, const MeshGroup& g) {
  std::map<std::pair<int, int>, int> directed;
  std::set<std::pair<int, int>> undirected;
  GroupTopology t;
  for (int i = g.first_triangle; i < g.first_triangle + g.triangle_count; ++i) {
    const auto& tri = m.triangles[i];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      EXPECT_GE(a, g.first_vertex);
      EXPECT_LT(a, g.first_vertex + g.vertex_count);
      ++directed[{a, b}];
      undirected.insert({std::min(a, b), std::max(a, b)});
    }
    t.volume += m.vertices[tri[0]].dot(m.vertices[tri[1]].cross(m.vertices[tri[2]])) / 6.0;
  }
  for (const auto& [e, n] : directed) {
    const auto it = directed.find({e.second, e.first});
    if (n != 1 || it == directed.end() || it->second != 1) ++t.unmatched;
  }
  t.euler = g.vertex_count - static_cast<int>(undirected.size()) + g.triangle_count;
  return t;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("topoframe_cad_" + name);
}

}  // namespace

TEST(BuildCsg, SingleMemberRadius) {
  auto g = two_members(707.0, 707.0);
  g.edges.pop_back();
  const auto tree = build_csg(g);
  ASSERT_EQ(tree.cylinders.size(), 1u);
  EXPECT_TRUE(tree.spheres.empty());
  EXPECT_NEAR(tree.cylinders[0].radius, std::sqrt(707.0 / kPi), 1e-12);
  EXPECT_NEAR(tree.cylinders[0].radius, 15.0, 0.01);
  EXPECT_EQ(tree.cylinders[0].member, 1);
}

TEST(BuildCsg, JointSphereTakesLargestRadius) {
  const double a15 = kPi * 15 * 15, a20 = kPi * 20 * 20;
  const auto tree = build_csg(two_members(a15, a20));
  ASSERT_EQ(tree.spheres.size(), 1u);
  EXPECT_EQ(tree.spheres[0].node, 1);
  EXPECT_NEAR(tree.spheres[0].radius, 20.0, 1e-12);
  EXPECT_EQ(tree.spheres[0].center, Eigen::Vector3d(500, 0, 0));
}

TEST(BuildCsg, CatalogSectionUsesOuterDiameter) {
  const auto cat = default_catalog(355);
  auto g = two_members(1, 1);
  g.edges[0].section = "CHS 60.3x4";
  const auto tree = build_csg(g, &cat);
  EXPECT_NEAR(tree.cylinders[0].radius, 30.15, 1e-12);
  EXPECT_EQ(tree.cylinders[0].wall, 4.0);
  EXPECT_NEAR(tree.cylinders[1].radius, std::sqrt(1 / kPi), 1e-12);
}

TEST(BuildCsg, Errors) {
  EXPECT_THROW(build_csg(FrameGraph{}), GeometryError);
  auto g = two_members(100, 100);
  g.nodes[1].x = 0;
  EXPECT_THROW(build_csg(g), GeometryError);
}

TEST(Tessellate, CylinderClosedAndExact) {
  auto g = two_members(kPi * 100, 1);
  g.edges.pop_back();
  const int n = 16;
  const auto mesh = tessellate(build_csg(g), n);
  ASSERT_EQ(mesh.groups.size(), 1u);
  EXPECT_EQ(mesh.groups[0].name, "member_1");
  EXPECT_EQ(mesh.triangles.size(), 4u * n);
  EXPECT_EQ(mesh.vertices.size(), 2u * n + 2);
  const auto t = topology(mesh, mesh.groups[0]);
  EXPECT_EQ(t.unmatched, 0);
  EXPECT_EQ(t.euler, 2);
  // inscribed n-gon prism, radius 10, length 500
  const double prism = 0.5 * n * 100 * std::sin(2 * kPi / n) * 500;
  EXPECT_NEAR(t.volume, prism, 1e-9 * prism);
}

TEST(Tessellate, SphereClosed) {
  const auto mesh = tessellate(build_csg(two_members(700, 900)), 12);
  ASSERT_EQ(mesh.groups.size(), 3u);
  EXPECT_EQ(mesh.groups[2].name, "joint_1");
  for (const auto& g : mesh.groups) {
    const auto t = topology(mesh, g);
    EXPECT_EQ(t.unmatched, 0) << g.name;
    EXPECT_EQ(t.euler, 2) << g.name;
    EXPECT_GT(t.volume, 0.0) << g.name;
  }
  const double r = std::sqrt(900 / kPi);
  const double v = topology(mesh, mesh.groups[2]).volume;
  EXPECT_LT(v, 4.0 / 3.0 * kPi * r * r * r);
  EXPECT_GT(v, 0.7 * 4.0 / 3.0 * kPi * r * r * r);
}

TEST(Tessellate, TooFewSegments) {
  EXPECT_THROW(tessellate(build_csg(two_members(1, 1)), 7), ValidationError);
}

TEST(Stl, SizeAndRoundTrip) {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.1, 0.2, 1.0 / 3.0}};
  m.triangles = {{0, 1, 2}, {0, 3, 1}};
  const auto path = temp_file("two.stl");
  write_stl(path, m);
  EXPECT_EQ(std::filesystem::file_size(path), 184u);
  const auto tris = read_stl(path);
  ASSERT_EQ(tris.size(), 2u);
  for (int t = 0; t < 2; ++t)
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < 3; ++c)
        EXPECT_EQ(tris[t].v[k][c], static_cast<float>(m.vertices[m.triangles[t][k]][c]));
  EXPECT_FLOAT_EQ(tris[0].normal[2], 1.0f);

  // truncated file
  std::filesystem::resize_file(path, 150);
  EXPECT_THROW(read_stl(path), ParseError);
  std::filesystem::remove(path);
}

TEST(Stl, MeshTriangleCountInHeader) {
  const auto mesh = tessellate(build_csg(two_members(700, 900)), 16);
  const auto path = temp_file("frame.stl");
  write_stl(path, mesh);
  EXPECT_EQ(std::filesystem::file_size(path), 84 + 50 * mesh.triangles.size());
  EXPECT_EQ(read_stl(path).size(), mesh.triangles.size());
  std::filesystem::remove(path);
}

TEST(Obj, GroupsAndFaces) {
  const auto mesh = tessellate(build_csg(two_members(700, 900)), 8);
  const auto path = temp_file("frame.obj");
  write_obj(path, mesh);
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> groups;
  std::size_t v = 0, f = 0;
  while (std::getline(in, line)) {
    if (line.rfind("g ", 0) == 0) groups.push_back(line.substr(2));
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  EXPECT_EQ(groups, (std::vector<std::string>{"member_1", "member_2", "joint_1"}));
  EXPECT_EQ(v, mesh.vertices.size());
  EXPECT_EQ(f, mesh.triangles.size());
  std::filesystem::remove(path);
}

TEST(CsgJson, UnionOverAllPrimitives) {
  const auto tree = build_csg(two_members(700, 900));
  const auto doc = nlohmann::json::parse(csg_to_json(tree));
  EXPECT_EQ(doc["primitives"].size(), tree.size());
  EXPECT_EQ(doc["ops"][0]["type"], "union");
  EXPECT_EQ(doc["ops"][0]["children"].size(), 3u);
  EXPECT_EQ(doc["root"], 3);
}
