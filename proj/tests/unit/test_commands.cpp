#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

using namespace decoupler;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("oracle command tabulates the linear family") {
  const json cfg = {{"nonlinearity", {{"family", "linear"}, {"params", {{"beta", 0.5}}}}},
                    {"oracle", {{"q", {0.0, 1.0}}, {"b", {2.0}}}}};
  const auto out = run_command("oracle", cfg, {});
  REQUIRE(out.exit_code == kExitOk);
  const auto& t = out.report["result"]["table"];
  CHECK(t[1]["H"].get<double>() == doctest::Approx(1.0 / 0.75));
  CHECK(out.report["version"] == kLibraryVersion);
  CHECK(out.report["config"]["oracle"] == cfg["oracle"]);
}

TEST_CASE("config errors map to exit code 2") {
  CHECK(run_command("nope", json::object(), {}).exit_code == kExitConfig);
  CHECK(run_command("pde", json::object(), {}).exit_code == kExitConfig);
  const json bad_key = {{"nonlinearity", {{"family", "linear"}, {"params", {{"beta", 0.5}}}}}, {"pde", {{"Qzero", 1.0}}}};
  const auto o = run_command("pde", bad_key, {});
  CHECK(o.exit_code == kExitConfig);
  CHECK(o.error.find("Qzero") != std::string::npos);
  RunOptions tier;
  tier.tier = "medium";
  CHECK(run_command("verify", json::object(), tier).exit_code == kExitConfig);
  const json bad_type = {{"nonlinearity", {{"family", "linear"}, {"params", {{"beta", "x"}}}}}};
  CHECK(run_command("oracle", bad_type, {}).exit_code == kExitConfig);
  CHECK(run_command("oracle", {{"pde_config", 1}}, {}).exit_code == kExitConfig);
  CHECK(run_command("oracle", {{"version", 2}}, {}).exit_code == kExitConfig);
}

TEST_CASE("pde command on the quadratic family writes its error table") {
  const auto dir = std::filesystem::temp_directory_path() / "decoupler_pde_cmd";
  std::filesystem::remove_all(dir);
  RunOptions opt;
  opt.out_dir = dir.string();
  const json cfg = {{"nonlinearity", {{"family", "add_mult"}, {"params", {{"alpha", 1.0}, {"beta", 0.5}}}}},
                    {"pde", {{"Q0", 0.5}, {"h_b", 1.0 / 32}}}};
  const auto out = run_command("pde", cfg, opt);
  REQUIRE(out.exit_code == kExitOk);
  CHECK(out.report["result"]["closed_form"]["max_rel_err"].get<double>() < 1e-3);
  CHECK(std::filesystem::exists(dir / "h_field.dcf"));
  CHECK(std::filesystem::exists(dir / "error_table.csv"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("decouple reports are byte-identical across worker counts") {
  const json cfg = {{"nonlinearity", {{"family", "linear"}, {"params", {{"beta", 0.5}}}}},
                    {"decouple", {{"Q0", 0.5}, {"n_paths", 2000}, {"B", 2.0}, {"steps_per_unit", 40}, {"tol", 0.02}}}};
  std::string text[2];
  for (int w : {1, 3}) {
    const auto dir = std::filesystem::temp_directory_path() / ("decoupler_w" + std::to_string(w));
    std::filesystem::remove_all(dir);
    RunOptions opt;
    opt.out_dir = dir.string();
    opt.workers = w;
    opt.seed = 99;
    const auto out = run_command("decouple", cfg, opt);
    REQUIRE(out.exit_code == kExitOk);
    text[w == 1 ? 0 : 1] = slurp(dir / "report.json") + slurp(dir / "field.dcf");
    CHECK(std::filesystem::exists(dir / "residuals.csv"));
    CHECK(std::filesystem::exists(dir / "lipschitz.csv"));
    std::filesystem::remove_all(dir);
  }
  CHECK(text[0] == text[1]);
}

TEST_CASE("constant sigma decouples in one iteration") {
  const json cfg = {{"nonlinearity", {{"family", "constant"}, {"params", {{"c", 1.0}}}}},
                    {"decouple", {{"Q0", 0.5}, {"n_paths", 1000}, {"B", 2.0}}}};
  const auto out = run_command("decouple", cfg, {});
  REQUIRE(out.exit_code == kExitOk);
  CHECK(out.report["result"]["picard"]["iterations"].get<int>() <= 2);
}

TEST_CASE("smoke verification passes") {
  RunOptions opt;
  opt.tier = "smoke";
  const auto out = run_command("verify", json::object(), opt);
  CHECK(out.exit_code == kExitOk);
  CHECK(out.report["result"]["failed"].empty());
}
