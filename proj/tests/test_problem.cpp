#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "topoframe/problem.hpp"

using namespace topoframe;

namespace {

const std::filesystem::path kFixtures = TOPOFRAME_FIXTURE_DIR;

std::string fixture_text(const std::string& name) {
  std::ifstream in(kFixtures / name);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string with(const std::string& text, const std::string& key, const nlohmann::json& value) {
  auto doc = nlohmann::json::parse(text);
  doc[key] = value;
  return doc.dump();
}

}  // namespace

TEST(Problem, LoadsCantileverFixture) {
  const auto p = load_problem(kFixtures / "cantilever.json");
  EXPECT_EQ(p.nx, 150);
  EXPECT_EQ(p.ny, 52);
  EXPECT_DOUBLE_EQ(p.h, 10.0);
  ASSERT_EQ(p.loads.size(), 1u);
  EXPECT_DOUBLE_EQ(p.loads[0].fy, -1e5);
  // load 18 rows below the top edge on the free end
  EXPECT_EQ(p.loads[0].pixel, p.pixel_index(149, 18));
}

TEST(Problem, LoadsSimplySupportedFixture) {
  const auto p = load_problem(kFixtures / "simply_supported.json");
  EXPECT_EQ(p.nx, 200);
  EXPECT_EQ(p.ny, 50);
  EXPECT_DOUBLE_EQ(p.volume_fraction, 0.3);
  EXPECT_DOUBLE_EQ(p.filter_radius, 5.4);
}

TEST(Problem, Defaults) {
  const auto d = default_parameters();
  EXPECT_DOUBLE_EQ(d.merge_ratio, 0.1);
  EXPECT_DOUBLE_EQ(d.area_bounds.min, 78.5);
  EXPECT_DOUBLE_EQ(d.area_bounds.max, 31416.0);
  EXPECT_DOUBLE_EQ(d.load_factor_uls, 1.35);
  EXPECT_DOUBLE_EQ(d.penalization, 3.0);
  EXPECT_DOUBLE_EQ(d.frame_tolerances.size, 1e-4);
  EXPECT_DOUBLE_EQ(d.frame_tolerances.layout, 1e-4);
  EXPECT_DOUBLE_EQ(d.frame_tolerances.frame, 1e-4);
  EXPECT_EQ(d.max_iter_mma, 20);
}

TEST(Problem, RejectsVolumeFraction) {
  const auto text = with(fixture_text("cantilever.json"), "volume_fraction", 1.2);
  try {
    parse_problem(text);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("volume_fraction out of range"), std::string::npos);
  }
}

TEST(Problem, RejectsEveryInvariant) {
  const auto base = fixture_text("cantilever.json");
  EXPECT_THROW(parse_problem(with(base, "nx", 1)), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "penalization", 0.5)), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "filter_radius", 0.0)), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "merge_ratio", 0.5)), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "poisson", 0.5)), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "youngs_void", 3e5)), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "area_bounds", {{"min", 100.0}, {"max", 50.0}})), ValidationError);
  EXPECT_THROW(parse_problem(with(base, "loads", nlohmann::json::array({{{"pixel", {150, 0}}, {"fy", -1.0}}}))),
               ValidationError);
}

TEST(Problem, MalformedDocumentReportsLocation) {
  try {
    parse_problem("{\n  \"nx\": 10,\n  \"ny\": ,\n}");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Problem, WrongFieldTypeNamesField) {
  const auto text = with(fixture_text("cantilever.json"), "nx", "wide");
  try {
    parse_problem(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("nx"), std::string::npos) << e.what();
  }
}

TEST(Problem, RoundTrip) {
  for (const char* name : {"cantilever.json", "simply_supported.json"}) {
    const auto p = load_problem(kFixtures / name);
    const auto q = parse_problem(serialize_problem(p));
    EXPECT_EQ(p, q) << name;
  }
}

TEST(Problem, TaggedPixelsIncludeRunEndsAndLoads) {
  const auto p = load_problem(kFixtures / "cantilever.json");
  const auto tags = p.tagged_pixels();
  EXPECT_NE(std::find(tags.begin(), tags.end(), p.pixel_index(0, 0)), tags.end());
  EXPECT_NE(std::find(tags.begin(), tags.end(), p.pixel_index(0, 51)), tags.end());
  EXPECT_NE(std::find(tags.begin(), tags.end(), p.pixel_index(149, 18)), tags.end());
  EXPECT_EQ(p.support_pixels().size(), 52u);
}
