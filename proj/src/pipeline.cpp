#include "topoframe/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "topoframe/cadgen.hpp"
#include "topoframe/frame_fe.hpp"
#include "topoframe/frame_opt.hpp"
#include "topoframe/svg.hpp"
#include "topoframe/topopt.hpp"

namespace topoframe {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void require(const fs::path& dir, const std::string& file, Stage producer) {
  if (!fs::exists(dir / file))
    throw Error("missing " + (dir / file).string() + "; run the '" + stage_name(producer) + "' stage first");
}

void note(const PipelineOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

void record(const fs::path& out, Stage stage, const std::vector<std::string>& files, const PipelineOptions& o) {
  using nlohmann::json;
  const fs::path mpath = out / "manifest.json";
  json doc = json::object();
  if (fs::exists(mpath)) {
    std::ifstream in(mpath);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(mpath.string() + ": " + e.what());
    }
  }
  json entry;
  for (const auto& f : files) entry["files"][f] = checksum_hex(file_checksum(out / f));
  entry["seed"] = o.seed;
  doc["stages"][stage_name(stage)] = entry;
  write_text(mpath, doc.dump(2) + "\n");
}

DensityField read_field(const DesignProblem& p, const fs::path& out) {
  require(out, "density.csv", Stage::Topopt);
  DensityField f;
  f.nx = p.nx;
  f.ny = p.ny;
  f.filtered = read_density_csv(out / "density.csv", p.nx, p.ny);
  f.rho = f.filtered;
  return f;
}

std::vector<std::string> stage_topopt(const DesignProblem& p, const fs::path& out, const PipelineOptions& o) {
  TopOptOptions topt;
  topt.progress = [&](int it, double c, double v, double ch) {
    if (it % 10 == 0)
      note(o, "topopt iteration " + std::to_string(it) + ": C = " + std::to_string(c) + ", V = " + std::to_string(v) +
                  ", change = " + std::to_string(ch));
  };
  const auto res = run_topopt(p, topt);
  note(o, std::string("topopt ") + (res.converged ? "converged" : "stopped at the iteration cap") + " after " +
              std::to_string(res.trace.size()) + " iterations");
  write_density_csv(out / "density.csv", p.nx, p.ny, res.field.filtered);
  write_density_pgm(out / "density.pgm", p.nx, p.ny, res.field.filtered);
  write_topopt_trace_csv(out / "topopt_trace.csv", res.trace);
  write_text(out / "density.svg", svg_density(res.field.filtered, p.nx, p.ny, p.h));
  return {"density.csv", "density.pgm", "topopt_trace.csv", "density.svg"};
}

std::vector<std::string> stage_skeletonize(const DesignProblem& p, const fs::path& out, const PipelineOptions& o) {
  const DensityField field = read_field(p, out);
  double eta = 0.0;
  const BinaryRaster binary = binarize(field, p, &eta);
  note(o, "threshold eta = " + std::to_string(eta) + ", " + std::to_string(binary.count()) + " solid pixels");
  const Skeleton skel = skeletonize(binary);
  write_pbm(out / "binary.pbm", binary);
  write_pbm(out / "skeleton.pbm", skel.raster);
  write_tags_json(out / "tags.json", skel.raster, eta);
  write_text(out / "skeleton.svg", svg_skeleton(binary, skel, p.h));
  return {"binary.pbm", "skeleton.pbm", "tags.json", "skeleton.svg"};
}

std::vector<std::string> stage_extract(const DesignProblem& p, const fs::path& out, const PipelineOptions& o) {
  require(out, "skeleton.pbm", Stage::Skeletonize);
  require(out, "tags.json", Stage::Skeletonize);
  Skeleton skel;
  skel.raster = read_pbm(out / "skeleton.pbm");
  skel.raster.tags = read_tags_json(out / "tags.json", skel.raster.width, skel.raster.height);
  skel.types = classify_pixels(skel.raster);
  const FrameGraph raw = build_graph(skel, p);
  std::vector<std::string> warnings;
  const FrameGraph g = clean_graph(raw, p, &warnings);
  note(o, "extracted " + std::to_string(raw.num_edges()) + " raw members, " + std::to_string(g.num_edges()) +
              " after cleanup");
  for (const auto& w : warnings) note(o, "warning: " + w);
  save_graph(raw, out / "graph_raw.json");
  save_graph(g, out / "graph.json");
  write_text(out / "graph.svg", svg_frame(g, p.width(), p.height()));
  std::string log;
  for (const auto& w : warnings) log += w + "\n";
  write_text(out / "extract_log.txt", log);
  return {"graph_raw.json", "graph.json", "graph.svg", "extract_log.txt"};
}

std::vector<std::string> stage_optimize(const DesignProblem& p, const fs::path& out, const PipelineOptions& o) {
  require(out, "graph.json", Stage::Extract);
  const FrameGraph g = load_graph(out / "graph.json");
  const FrameOptResult res = run_sequential(g, p);
  note(o, "frame optimization: " + std::to_string(res.stages) + " stages, C = " +
              std::to_string(res.final_compliance) + (res.converged ? " (converged)" : " (stage cap)") + ", " +
              std::to_string(res.graph.num_edges()) + " members");
  save_graph(res.graph, out / "frame.json");
  write_frame_trace_csv(out / "frame_trace.csv", res.trace);
  std::vector<double> areas;
  for (const auto& e : res.graph.edges) areas.push_back(e.area);
  const FrameResult fr = solve_frame(res.graph, areas, p.youngs_solid);
  write_text(out / "frame_result.json", frame_result_json(res.graph, fr));
  write_text(out / "frame.svg", svg_frame(res.graph, p.width(), p.height(), &fr));
  std::string log;
  for (const auto& l : res.log) log += l + "\n";
  write_text(out / "frame_log.txt", log);
  return {"frame.json", "frame_trace.csv", "frame_result.json", "frame.svg", "frame_log.txt"};
}

bool stage_design(const DesignProblem& p, const fs::path& out, const PipelineOptions& o,
                  std::vector<std::string>& files) {
  require(out, "frame.json", Stage::OptimizeFrame);
  FrameGraph g = load_graph(out / "frame.json");
  const SectionCatalog catalog = pipeline_catalog(p, o);
  const DesignOptions dopt = design_options(p);
  bool preassigned = !g.edges.empty();
  for (const auto& e : g.edges) preassigned = preassigned && !e.section.empty();
  if (!preassigned) g = assign_sections(g, catalog, dopt.filter);
  const DesignReport rep = verify_frame(g, catalog, dopt);
  note(o, std::string("design checks ") + (rep.pass ? "pass" : "FAIL") + ", SLS deflection " +
              std::to_string(rep.deflection.deflection) + " mm (limit " + std::to_string(rep.deflection.limit) + ")");
  save_graph(g, out / "design_frame.json");
  write_text(out / "report.json", report_json(rep));
  write_text(out / "report.md", report_markdown(rep));
  std::vector<double> areas, inertias;
  section_stiffness(g, catalog, areas, inertias);
  const FrameResult fr = solve_frame(g, areas, dopt.youngs, inertias);
  write_text(out / "design.svg", svg_frame(g, p.width(), p.height(), &fr));
  files = {"design_frame.json", "report.json", "report.md", "design.svg"};
  return rep.pass;
}

std::vector<std::string> stage_cad(const DesignProblem& p, const fs::path& out, const PipelineOptions& o) {
  require(out, "design_frame.json", Stage::Design);
  const FrameGraph g = load_graph(out / "design_frame.json");
  const SectionCatalog catalog = pipeline_catalog(p, o);
  const CsgTree tree = build_csg(g, &catalog);
  const TriMesh mesh = tessellate(tree, o.mesh_segments);
  write_text(out / "csg.json", csg_to_json(tree));
  write_stl(out / "model.stl", mesh);
  write_obj(out / "model.obj", mesh);
  note(o, "solid model: " + std::to_string(tree.cylinders.size()) + " cylinders, " +
              std::to_string(tree.spheres.size()) + " spheres, " + std::to_string(mesh.triangles.size()) +
              " triangles");
  return {"csg.json", "model.stl", "model.obj"};
}

}  // namespace

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::Topopt, Stage::Skeletonize,   Stage::Extract,
                                         Stage::OptimizeFrame, Stage::Design, Stage::Cad};
  return stages;
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Topopt: return "topopt";
    case Stage::Skeletonize: return "skeletonize";
    case Stage::Extract: return "extract";
    case Stage::OptimizeFrame: return "optimize-frame";
    case Stage::Design: return "design";
    case Stage::Cad: return "cad";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : all_stages())
    if (stage_name(s) == name) return s;
  throw Error("unknown stage '" + name + "'");
}

DesignProblem effective_problem(DesignProblem p, const PipelineOptions& o) {
  if (o.threshold) p.threshold_mode = *o.threshold;
  if (o.merge_ratio) p.merge_ratio = *o.merge_ratio;
  if (o.angle_limit) p.angle_limit = *o.angle_limit;
  validate(p);
  return p;
}

SectionCatalog pipeline_catalog(const DesignProblem& p, const PipelineOptions& o) {
  return o.catalog ? load_catalog(*o.catalog, p.yield_fy) : default_catalog(p.yield_fy);
}

FrameGraph clean_graph(const FrameGraph& raw, const DesignProblem& p, std::vector<std::string>* warnings) {
  FrameGraph g = prune(raw);
  g = contract_short_edges(g, p.merge_ratio, warnings);
  g = snap_angles(g, p.angle_limit);
  g = compact(g);
  check_graph(g);
  return g;
}

std::uint64_t file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string checksum_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool run_stage(Stage stage, const DesignProblem& problem, const fs::path& out, const PipelineOptions& o) {
  fs::create_directories(out);
  const DesignProblem p = effective_problem(problem, o);
  note(o, "stage " + stage_name(stage));
  std::vector<std::string> files;
  bool pass = true;
  switch (stage) {
    case Stage::Topopt: files = stage_topopt(p, out, o); break;
    case Stage::Skeletonize: files = stage_skeletonize(p, out, o); break;
    case Stage::Extract: files = stage_extract(p, out, o); break;
    case Stage::OptimizeFrame: files = stage_optimize(p, out, o); break;
    case Stage::Design: pass = stage_design(p, out, o, files); break;
    case Stage::Cad: files = stage_cad(p, out, o); break;
  }
  record(out, stage, files, o);
  return pass;
}

bool run_pipeline(const DesignProblem& problem, const fs::path& out, const PipelineOptions& o, Stage from) {
  bool pass = true;
  bool started = false;
  for (Stage s : all_stages()) {
    started = started || s == from;
    if (!started) continue;
    const bool ok = run_stage(s, problem, out, o);
    if (s == Stage::Design) pass = ok;
  }
  return pass;
}

}  // namespace topoframe
