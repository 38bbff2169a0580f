#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "topoframe/frame_fe.hpp"
#include "topoframe/graph.hpp"
#include "topoframe/problem.hpp"

namespace topoframe {

/// dC/dA_i = -u_i^T (dK_i/dA_i) u_i with I = A^2/(4 pi).
std::vector<double> size_gradient(const FrameGraph& graph, const FrameResult& result,
                                  std::span<const double> areas, double youngs);
/// dV/dA_i = L_i.
std::vector<double> size_volume_gradient(const FrameGraph& graph);

/// Untagged nodes, in id order; they carry the layout variables (x, y).
std::vector<int> layout_nodes(const FrameGraph& graph);
/// dC/ds for s = (x, y) of each layout node, through the transformation
/// matrices and the member lengths. Throws Error("collapsed member ...").
std::vector<double> layout_gradient(const FrameGraph& graph, const FrameResult& result,
                                    std::span<const double> areas, double youngs);
/// dV/ds = sum_j A_j dL_j/ds.
std::vector<double> layout_volume_gradient(const FrameGraph& graph, std::span<const double> areas);

/// Scales areas not pinned at a bound so that sum A_i L_i equals `budget`.
/// Throws Error("infeasible bounds") when the bounds make that impossible.
void restore_volume(std::vector<double>& areas, std::span<const double> lengths, double budget,
                    double a_min, double a_max);

/// A0 = V_f * V_domain / sum L_i.
double initial_area(const FrameGraph& graph, const DesignProblem& problem);

struct FrameTraceRow {
  int stage = 0;
  std::string kind;  // "size" or "layout"
  int iteration = 0;
  double compliance = 0.0;
  double volume = 0.0;
  double max_change = 0.0;
};

struct FrameOptResult {
  FrameGraph graph;                     // optimized layout with areas
  std::vector<FrameTraceRow> trace;
  std::vector<double> stage_compliance; // at the start, then after each stage
  double initial_compliance = 0.0;
  double final_compliance = 0.0;
  bool converged = false;
  int stages = 0;
  std::vector<std::string> log;
};

/// Alternating size and layout optimization with MMA, merging short members
/// after each layout stage, until the relative change of compliance between
/// stage ends drops below the frame tolerance or the stage cap is reached.
FrameOptResult run_sequential(const FrameGraph& graph, const DesignProblem& problem);

void write_frame_trace_csv(const std::filesystem::path& path, const std::vector<FrameTraceRow>& trace);

}  // namespace topoframe
