#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "topoframe/eurocode3.hpp"
#include "topoframe/graph.hpp"

namespace topoframe {

struct Cylinder {
  Eigen::Vector3d p1;
  Eigen::Vector3d p2;
  double radius = 0.0;
  int member = 0;
  std::string section;  // empty for solid members
  double wall = 0.0;    // hollow sections only, metadata
};

struct Sphere {
  Eigen::Vector3d center;
  double radius = 0.0;
  int node = 0;
};

/// Union of member cylinders and joint spheres. The union itself is left to
/// the consumer; the tree records it as one operation over all primitives.
struct CsgTree {
  std::vector<Cylinder> cylinders;
  std::vector<Sphere> spheres;

  std::size_t size() const { return cylinders.size() + spheres.size(); }
};

/// Cylinder radius is d/2 when the member carries a catalog section found in
/// `catalog`, else sqrt(A/pi). Spheres sit on nodes of degree >= 2.
CsgTree build_csg(const FrameGraph& graph, const SectionCatalog* catalog = nullptr);

struct MeshGroup {
  std::string name;
  int first_vertex = 0;
  int vertex_count = 0;
  int first_triangle = 0;
  int triangle_count = 0;
};

struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<MeshGroup> groups;
};

/// Cylinders as n-gon prisms with fan caps, spheres as UV meshes with
/// n slices and n/2 stacks. Each primitive is its own closed group.
TriMesh tessellate(const CsgTree& tree, int segments = 16);

std::string csg_to_json(const CsgTree& tree);

/// Binary STL, little-endian.
void write_stl(const std::filesystem::path& path, const TriMesh& mesh);

struct StlTriangle {
  std::array<float, 3> normal;
  std::array<std::array<float, 3>, 3> v;
};
std::vector<StlTriangle> read_stl(const std::filesystem::path& path);

/// Wavefront OBJ with one `g` group per primitive.
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

}  // namespace topoframe
