#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topoframe/problem.hpp"
#include "topoframe/raster.hpp"

namespace topoframe {

struct GraphNode {
  double x = 0.0;  // mm, Cartesian
  double y = 0.0;  // mm, y up
  SupportDofs support;
  bool loaded = false;
  double fx = 0.0;
  double fy = 0.0;
  int pixel = -1;  // source pixel, -1 once moved or merged

  bool is_support() const { return support.any(); }
  bool tagged() const { return is_support() || loaded; }
};

struct GraphEdge {
  int n1 = 0;
  int n2 = 0;
  int chain = 0;       // pixel steps along the skeleton
  double area = 0.0;   // mm^2
  std::string section; // assigned catalog designation, if any

  int other(int n) const { return n == n1 ? n2 : n1; }
};

/// Frame graph. Node and edge ids are their positions in the vectors.
struct FrameGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  double merge_ratio = 0.1;
  double angle_limit = 10.0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  double length(int e) const;
  std::vector<int> degrees() const;
  /// Incident edge ids per node.
  std::vector<std::vector<int>> incidence() const;
  double total_length() const;
  double volume() const;  // sum A_i L_i
};

/// Throws Error describing the first problem: self-loop, duplicate edge,
/// dangling id, disconnected graph, or a load without a support.
void check_graph(const FrameGraph& graph);
bool is_connected(const FrameGraph& graph);

/// Nodes at featured pixels (End, Joint, tagged, and pixels where the
/// skeleton does not continue as a simple chain), edges along the chains in
/// between. Tags carry the problem's support DOFs and loads. Only the part
/// connected to the loads is kept.
FrameGraph build_graph(const Skeleton& skeleton, const DesignProblem& problem);

/// Node position of a pixel centre.
inline double pixel_x(int col, double h) { return (col + 0.5) * h; }
inline double pixel_y(int row, int ny, double h) { return (ny - row - 0.5) * h; }

/// Removes untagged leaves until none remain.
FrameGraph prune(const FrameGraph& graph);

/// Contracts edges shorter than ratio times the total length of the members
/// at one of their endpoints, or shorter than `min_length`. Warnings for edges
/// between two tagged nodes are appended to `warnings` when given. Areas of members
/// that become parallel are added together.
FrameGraph contract_short_edges(const FrameGraph& graph, double ratio,
                                std::vector<std::string>* warnings = nullptr,
                                double min_length = 0.0);

/// Straightens near-collinear chains of edges: interior untagged nodes are
/// projected onto the line through the chain ends.
FrameGraph snap_angles(const FrameGraph& graph, double angle_limit_deg);

/// Drops unused nodes and renumbers.
FrameGraph compact(const FrameGraph& graph);

std::string graph_to_json(const FrameGraph& graph);
FrameGraph graph_from_json(const std::string& text);
void save_graph(const FrameGraph& graph, const std::filesystem::path& path);
FrameGraph load_graph(const std::filesystem::path& path);

}  // namespace topoframe
