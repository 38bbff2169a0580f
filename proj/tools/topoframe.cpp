// Command-line driver for the design pipeline.
#include <iostream>

#include "CLI11.hpp"
#include "topoframe/pipeline.hpp"

using namespace topoframe;

namespace {

ThresholdMode parse_eta(const std::string& s) {
  ThresholdMode m;
  if (s == "otsu") {
    m.kind = ThresholdMode::Kind::Otsu;
  } else if (s == "volume") {
    m.kind = ThresholdMode::Kind::Volume;
  } else {
    m.kind = ThresholdMode::Kind::Fixed;
    try {
      std::size_t used = 0;
      m.eta = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ValidationError("--eta expects a number, 'otsu' or 'volume', got '" + s + "'");
    }
  }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology optimization to verified frame designs"};
  app.require_subcommand(1);

  std::string problem_path;
  std::string out_dir = "out";
  std::string stage_opt;
  std::string eta_opt;
  std::string catalog_opt;
  double merge_ratio = 0.0, angle_limit = 0.0;
  std::uint64_t seed = 0;
  int segments = 16;
  bool quiet = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("problem", problem_path, "Problem JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Recorded in the manifest; the pipeline is deterministic");
    sub->add_option("--catalog", catalog_opt, "Section catalog CSV")->check(CLI::ExistingFile);
    sub->add_option("--eta", eta_opt, "Threshold: a value in (0,1), 'otsu' or 'volume'");
    sub->add_option("--merge-ratio", merge_ratio, "Short-member merge ratio");
    sub->add_option("--angle-limit", angle_limit, "Collinearity snap limit in degrees");
    sub->add_option("--segments", segments, "Tessellation segments (>= 8)");
    sub->add_flag("-q,--quiet", quiet, "No progress output");
  };

  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (Stage s : all_stages()) {
    auto* sub = app.add_subcommand(stage_name(s), "Run the " + stage_name(s) + " stage");
    add_common(sub);
    stage_cmds.push_back({sub, s});
  }
  auto* all = app.add_subcommand("all", "Run every stage in order");
  add_common(all);
  all->add_option("--stage", stage_opt, "Resume from this stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; every usage error maps to the generic error code
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    PipelineOptions opt;
    opt.seed = seed;
    opt.mesh_segments = segments;
    if (!eta_opt.empty()) opt.threshold = parse_eta(eta_opt);
    if (!catalog_opt.empty()) opt.catalog = catalog_opt;
    for (const auto& [sub, s] : stage_cmds) {
      (void)s;
      if (sub->count("--merge-ratio")) opt.merge_ratio = merge_ratio;
      if (sub->count("--angle-limit")) opt.angle_limit = angle_limit;
    }
    if (all->count("--merge-ratio")) opt.merge_ratio = merge_ratio;
    if (all->count("--angle-limit")) opt.angle_limit = angle_limit;
    if (!quiet) opt.log = [](const std::string& m) { std::cerr << m << '\n'; };

    const DesignProblem problem = load_problem(problem_path);
    bool pass = true;
    if (all->parsed()) {
      const Stage from = stage_opt.empty() ? Stage::Topopt : parse_stage(stage_opt);
      pass = run_pipeline(problem, out_dir, opt, from);
    } else {
      for (const auto& [sub, s] : stage_cmds)
        if (sub->parsed()) pass = run_stage(s, problem, out_dir, opt);
    }
    if (!pass) {
      std::cerr << "design checks failed; see " << out_dir << "/report.md\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
