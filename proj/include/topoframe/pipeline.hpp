#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topoframe/eurocode3.hpp"
#include "topoframe/graph.hpp"
#include "topoframe/problem.hpp"
#include "topoframe/raster.hpp"

namespace topoframe {

enum class Stage { Topopt, Skeletonize, Extract, OptimizeFrame, Design, Cad };

const std::vector<Stage>& all_stages();
std::string stage_name(Stage stage);
/// Throws Error for unknown names.
Stage parse_stage(const std::string& name);

/// Overrides applied on top of the problem file.
struct PipelineOptions {
  std::optional<ThresholdMode> threshold;
  std::optional<double> merge_ratio;
  std::optional<double> angle_limit;
  std::optional<std::filesystem::path> catalog;
  std::uint64_t seed = 0;  // nothing in the pipeline is random; recorded only
  int mesh_segments = 16;
  std::function<void(const std::string&)> log;
};

DesignProblem effective_problem(DesignProblem problem, const PipelineOptions& options);
SectionCatalog pipeline_catalog(const DesignProblem& problem, const PipelineOptions& options);

/// Graph cleanup after extraction: prune, contract short edges, snap angles,
/// drop unused nodes. Contraction warnings go to `warnings`.
FrameGraph clean_graph(const FrameGraph& raw, const DesignProblem& problem, std::vector<std::string>* warnings);

/// FNV-1a 64-bit hash of the file bytes.
std::uint64_t file_checksum(const std::filesystem::path& path);
std::string checksum_hex(std::uint64_t value);

/// Runs one stage, reading the upstream artifacts from `out` and writing its
/// own there, then records them in out/manifest.json. Returns false only for
/// the design stage when a check fails.
bool run_stage(Stage stage, const DesignProblem& problem, const std::filesystem::path& out,
               const PipelineOptions& options);

/// Runs `from` and every later stage. Returns the design verdict (true when
/// the design stage is not part of the run).
bool run_pipeline(const DesignProblem& problem, const std::filesystem::path& out, const PipelineOptions& options,
                  Stage from = Stage::Topopt);

}  // namespace topoframe
