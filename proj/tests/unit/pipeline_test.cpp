#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mhdlab/pipeline.hpp"

namespace mhdlab {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kPi = 3.141592653589793;

std::string scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mhdlab_pipeline_test_" + name);
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_box(double sigma) {
  return {{"grid", {{"lx", "2pi"}, {"ly", "2pi"}, {"nx", 16}, {"ny", 16}}},
          {"physics", {{"nu", 1.0}, {"eta", 1.0}, {"sigma", sigma}}},
          {"spectral", {{"count", 12}}}};
}

ErrorKind kind_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::fit;  // sentinel: nothing thrown
}

GTEST_TEST(ConfigTest, DefaultsAndPiLengths) {
  const RunConfig cfg = parse_config(json::object());
  EXPECT_EQ(cfg.grid.nx, 32);
  EXPECT_EQ(cfg.sigma, 0.0);
  const RunConfig c = parse_config({{"grid", {{"lx", "2pi"}, {"ly", "pi"}}}});
  EXPECT_DOUBLE_EQ(c.grid.lx, 2 * kPi);
  EXPECT_DOUBLE_EQ(c.grid.ly, kPi);
}

GTEST_TEST(ConfigTest, RejectsBadDocuments) {
  EXPECT_EQ(kind_of({{"grid", {{"cells", 7}}}}), ErrorKind::config);
  EXPECT_EQ(kind_of({{"bogus", 1}}), ErrorKind::config);
  EXPECT_EQ(kind_of({{"grid", {{"nx", "many"}}}}), ErrorKind::config);
  EXPECT_EQ(kind_of({{"grid", {{"nx", 2}}}}), ErrorKind::config);
  EXPECT_EQ(kind_of({{"physics", {{"nu", -1.0}}}}), ErrorKind::config);
  EXPECT_EQ(kind_of({{"carleman", {{"tau_list", json::array()}}}}), ErrorKind::config);
  EXPECT_EQ(kind_of({{"stabilize", {{"gamma", 0.0}}}}), ErrorKind::config);
  EXPECT_EQ(kind_of(json::array()), ErrorKind::config);
}

GTEST_TEST(ConfigTest, HashIsCanonical) {
  const RunConfig a = parse_config(small_box(1.5));
  const RunConfig b = parse_config(config_to_json(a));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_NE(config_hash(a), config_hash(parse_config(small_box(1.4))));
}

GTEST_TEST(ExitStatusTest, DistinctPerKind) {
  EXPECT_EQ(exit_status(ErrorKind::config), 2);
  EXPECT_EQ(exit_status(ErrorKind::uncontrollable), 12);
  EXPECT_EQ(exit_status(ErrorKind::fit), 16);
  const json doc = error_document(Error(ErrorKind::actuator, "x"), "abc");
  EXPECT_EQ(doc["error"], to_string(ErrorKind::actuator));
  EXPECT_EQ(doc["exit_status"], exit_status(ErrorKind::actuator));
  EXPECT_EQ(doc["config_hash"], "abc");
}

GTEST_TEST(RunTest, SpectrumCountsUnstableModes) {
  RunConfig cfg = parse_config(small_box(1.5));
  cfg.output_dir = scratch("spectrum");
  const json s = run_command("spectrum", cfg);
  const json& r = s["results"]["spectrum"];
  // sigma = 1.5 lifts the eight -1 modes to 0.5; -2 modes stay stable.
  EXPECT_EQ(r["N"], 8);
  EXPECT_EQ(r["M"], 1);
  EXPECT_LE(r["max_residual"].get<double>(), 1e-6);
  EXPECT_EQ(s["config_hash"], config_hash(cfg));
  EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "spectrum.txt"));
  EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "summary.json"));
}

GTEST_TEST(RunTest, StableConfigIsVacuous) {
  RunConfig cfg = parse_config(small_box(0.0));
  cfg.output_dir = scratch("vacuous");
  const json s = run_command("ucp", cfg);
  EXPECT_EQ(s["results"]["ucp"]["N"], 0);
  EXPECT_TRUE(s["results"]["ucp"]["vacuous"].get<bool>());
  EXPECT_TRUE(s["results"]["ucp"]["passed"].get<bool>());
}

GTEST_TEST(RunTest, RerunsAreByteIdentical) {
  RunConfig cfg = parse_config(small_box(1.5));
  cfg.output_dir = scratch("repeat");
  run_command("spectrum", cfg);
  const std::string first = slurp(fs::path(cfg.output_dir) / "spectrum.txt");
  const std::string summary = slurp(fs::path(cfg.output_dir) / "summary.json");
  run_command("spectrum", cfg);
  EXPECT_EQ(slurp(fs::path(cfg.output_dir) / "spectrum.txt"), first);
  EXPECT_EQ(slurp(fs::path(cfg.output_dir) / "summary.json"), summary);
}

GTEST_TEST(RunTest, UnknownCommand) {
  RunConfig cfg = parse_config(small_box(0.0));
  cfg.output_dir = scratch("unknown");
  try {
    run_command("everything", cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

}  // namespace
}  // namespace mhdlab
