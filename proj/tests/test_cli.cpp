#include <doctest.h>

#include "sal/cli.hpp"
#include "sal/io.hpp"

#include <filesystem>
#include <sstream>

using namespace sal;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  Run r;
  r.code = dispatch(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sal_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config round trip") {
    RunConfig c;
    c.model.kind = "toggle_switch";
    c.model.params["b"] = 0.3;
    c.sim.eps = 0.05;
    c.sim.n_traj = 12;
    c.scan.eps = {0.2, 0.1, 0.05, 0.025};
    c.fpe.box = {-1, -1, 2, 2};
    c.lyapunov.candidate = "glued";
    c.identity.levels = {0.1, 0.2};
    const Json j = to_json(c);
    const RunConfig back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.model.params.at("b") == 0.3);
    CHECK(back.fpe.box.size() == 4);
  }

  TEST_CASE("unknown config keys are rejected") {
    Json j = to_json(RunConfig{});
    j["sim"]["dtt"] = 0.1;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }

  TEST_CASE("model aliases") {
    CHECK(canonical_model_kind("ou") == "linear_ou");
    CHECK(canonical_model_kind("lc") == "limit_cycle");
    CHECK(canonical_model_kind("toggle") == "toggle_switch");
    CHECK(canonical_model_kind("limit_cycle") == "limit_cycle");
    CHECK_THROWS_AS(canonical_model_kind("lorenz"), ConfigError);
  }

  TEST_CASE("help and version") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"msd-scan", "--help"}).code == 0);
    const Run v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(!v.out.empty());
  }

  TEST_CASE("validation errors leave no files") {
    const fs::path dir = scratch("bad");
    const Run a = run({"simulate", "--model", "ou", "--frobnicate", "--out", dir.string()});
    CHECK(a.code == 2);
    CHECK(!fs::exists(dir));
    const Run b = run({"msd-scan", "--model", "ou", "--eps", "0.2,0.1,0.05", "--out", dir.string()});
    CHECK(b.code == 2);
    CHECK(!fs::exists(dir));
    CHECK(run({"simulate", "--model", "lorenz", "--out", dir.string()}).code == 2);
    CHECK(!fs::exists(dir));
  }

  TEST_CASE("simulate writes samples, config and manifest") {
    const fs::path dir = scratch("sim");
    const Run r = run({"simulate", "--model", "lc", "--eps", "0.1", "--n-traj", "4", "--samples-per-traj", "20",
                       "--burn", "2", "--out", dir.string(), "--threads", "2"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "samples_limit_cycle_eps0.1.csv"));
    CHECK(fs::exists(dir / "simulate_limit_cycle.json"));
    CHECK(fs::exists(dir / "config.json"));
    const Json m = Json::parse(read_text_file(dir / "manifest.json"));
    CHECK(m["command"] == "simulate");
    CHECK(m["threads"] == 2);
    bool listed = false;
    for (const auto& f : m["files"]) {
      const std::string name = f["path"];
      if (name == "samples_limit_cycle_eps0.1.csv") {
        listed = true;
        CHECK(f["fnv1a"] == fnv1a_hex(read_text_file(dir / name)));
      }
    }
    CHECK(listed);
    const Json cfg = Json::parse(read_text_file(dir / "config.json"));
    CHECK(cfg["sim"]["n_traj"] == 4);
    fs::remove_all(dir);
  }

  TEST_CASE("verify-lyapunov glued candidate") {
    const fs::path dir = scratch("lyap");
    const Run r = run({"verify-lyapunov", "--model", "lc", "--candidate", "glued", "--check", "class_bstar",
                       "--samples", "2000", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const Json j = Json::parse(read_text_file(dir / "lyapunov_limit_cycle_glued.json"));
    CHECK(j["verdict"] == "pass");
    fs::remove_all(dir);
  }

  TEST_CASE("fpe-solve on the 1-D gradient system") {
    const fs::path dir = scratch("fpe");
    const Run r = run({"fpe-solve", "--model", "gradient_1d", "--eps", "0.2", "--cells", "128", "--out",
                       dir.string()});
    REQUIRE(r.code == 0);
    bool density = false;
    for (const auto& e : fs::directory_iterator(dir))
      density |= e.path().filename().string().rfind("density_", 0) == 0;
    CHECK(density);
    fs::remove_all(dir);
  }
}
