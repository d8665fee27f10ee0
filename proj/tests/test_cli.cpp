#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "micromorph/run.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace micromorph;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("micromorph_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text)
{
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string key_of(const std::function<void()>& f)
{
  try
  {
    f();
  }
  catch (const ConfigError& e)
  {
    return e.key();
  }
  return "<no error>";
}

int run_binary(const std::string& args)
{
  const std::string cmd = std::string(MICROMORPH_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config: INI and JSON encodings agree")
{
  const auto a = config::from_key_values(config::read_ini(R"(
; comment line
[run]
seed = 7
[geometry]
domain = l_prism   ; inline comment
levels = 1 2
[energy]
model = both
q = 1.25
[loads]
preset = body_force
f = 0 0 1
[analysis]
tol_s = 0.2
)"));
  const auto b = config::from_key_values(config::read_json(R"({
    "run": {"seed": 7},
    "geometry": {"domain": "l_prism", "levels": [1, 2]},
    "energy": {"model": "both", "q": 1.25},
    "loads": {"preset": "body_force", "f": [0, 0, 1]},
    "analysis": {"tol_s": 0.2}
  })"));
  for (const auto* c : {&a, &b})
  {
    CHECK(c->seed == 7);
    CHECK(c->domain.shape == geometry::Shape::l_prism);
    CHECK(c->levels == std::vector<int>{1, 2});
    CHECK(c->finest_n() == 4);
    CHECK(c->models().size() == 2);
    CHECK(c->nonlinear.q == 1.25);
    CHECK(c->nonlinear.alpha == doctest::Approx(0.8));
    CHECK(c->force == Vec3(0, 0, 1));
    CHECK(c->regularity.tol_s == 0.2);
  }
  // defaults
  const auto d = config::from_key_values({});
  CHECK(d.domain.shape == geometry::Shape::unit_cube);
  CHECK(d.nonlinear.q == 1.5);
  CHECK(d.nonlinear.alpha == doctest::Approx(2.0 / 3.0));
  CHECK(d.regularity.tol_s == 0.15);
  CHECK(d.fuzz_samples == 10000);
}

TEST_CASE("config: errors name the offending key")
{
  auto ini = [](const std::string& text) { return [text] { config::from_key_values(config::read_ini(text)); }; };
  CHECK(key_of(ini("[energy]\nq = 2.5\n")) == "q");
  CHECK(key_of(ini("[energy]\nq = 1.5\nalpha = -1\n")) == "alpha");
  CHECK(key_of(ini("[energy]\nqq = 1.5\n")) == "energy.qq");
  CHECK(key_of(ini("[geometry]\ndomain = torus\n")) == "geometry.domain");
  CHECK(key_of(ini("[geometry]\nlevels = 3 2\n")) == "geometry.levels");
  CHECK(key_of(ini("[geometry]\nlevels = two\n")) == "geometry.levels");
  CHECK(key_of(ini("[loads]\npreset = manufactured\n[geometry]\ndomain = l_prism\n")) == "loads.preset");
  CHECK(key_of(ini("[loads]\nf = 1 2\npreset = body_force\n")) == "loads.f");
  CHECK(key_of(ini("[loads]\nf = 1 2 3\n")) == "loads.f");
  CHECK(key_of(ini("[solve]\ntol = -1\n")) == "solve.tol");
  CHECK(key_of(ini("[transform]\nh = 0.05 0\n")) == "transform.h");
  CHECK(key_of(ini("[analysis]\ngrid = 100\n")) == "analysis.h_bar");
  CHECK(key_of(ini("[energy]\nlc = isotropic 1 1\n")) == "energy");
  CHECK(key_of(ini("[energy]\nce = diagonal 2\n")) == "energy.ce");
  CHECK(key_of(ini("[run]\nexperiment = fly\n")) == "run.experiment");
  CHECK(key_of(ini("this is not ini\n")) == "config");
  CHECK(key_of([] { config::read_json("{\"energy\": 3}"); }) == "energy");
  CHECK(key_of([] { config::load_file("/nonexistent/file.ini"); }) == "config");
}

TEST_CASE("run: solve on the cube with zero loads gives zero fields")
{
  auto c = config::from_key_values(config::read_ini("[geometry]\nlevels = 1\n"));
  c.experiment = "solve";
  const auto r = run::run_experiment(c);
  CHECK(r.pass());
  REQUIRE(r.fields.size() == 1);
  CHECK(r.fields[0].solution->u.coeffs.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.fields[0].solution->p.coeffs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run: manufactured rates over nested levels")
{
  auto c = config::from_key_values(config::read_ini("[geometry]\nlevels = 2 3\n[loads]\npreset = manufactured\n"));
  c.experiment = "solve";
  const auto r = run::run_experiment(c);
  for (const auto& v : r.verdicts)
    MESSAGE(v.name << ": " << v.detail);
  CHECK(r.pass());
  CHECK(r.verdicts.size() == 4);
}

TEST_CASE("run: korn and helmholtz experiments")
{
  auto c = config::from_key_values(config::read_ini("[geometry]\nlevels = 1 2 3\n"));
  c.experiment = "korn";
  const auto k = run::run_experiment(c);
  for (const auto& v : k.verdicts)
    MESSAGE(v.name << ": " << v.detail);
  CHECK(k.pass());
  CHECK(k.tables.at("korn.csv").rows.size() == 3);

  c.experiment = "helmholtz";
  const auto h = run::run_experiment(c);
  CHECK(h.pass());
  CHECK(h.verdicts.size() == 6);
}

TEST_CASE("binary: exit codes and artifacts")
{
  const fs::path dir = scratch("bin");
  spit(dir / "zero.ini", "[run]\nexperiment = solve\n[geometry]\nlevels = 1\n");
  CHECK(run_binary("solve --config " + (dir / "zero.ini").string() + " --out " + (dir / "zero").string()) == 0);
  CHECK(fs::exists(dir / "zero" / "summary.json"));
  CHECK(fs::exists(dir / "zero" / "solve.csv"));
  CHECK(fs::exists(dir / "zero" / "fields_linear_n2.vtk"));
  const std::string vtk = slurp(dir / "zero" / "fields_linear_n2.vtk");
  CHECK(vtk.find("CELL_TYPES 48\n10\n") != std::string::npos);

  spit(dir / "bad.ini", "[energy]\nq = 2.5\n");
  CHECK(run_binary("solve --config " + (dir / "bad.ini").string()) == 2);
  CHECK(run_binary("solve") == 2);
  CHECK(run_binary("teleport --config " + (dir / "zero.ini").string()) == 2);
  // config names another experiment
  CHECK(run_binary("korn --config " + (dir / "zero.ini").string()) == 2);

  // a failing verdict: a rate threshold missed on pre-asymptotic levels
  spit(dir / "rates.ini", "[geometry]\nlevels = 0 1\n[loads]\npreset = manufactured\n");
  CHECK(run_binary("solve --config " + (dir / "rates.ini").string() + " --out " + (dir / "rates").string()) == 1);

  // numerical failure: Omega_eta is empty for eta = 2 * 0.5 * 2^-1
  spit(dir / "empty.ini", "[geometry]\nlevels = 1\n[analysis]\nk_min = 1\nk_max = 2\n[loads]\npreset = body_force\nf = 0 0 1\n");
  CHECK(run_binary("probe --config " + (dir / "empty.ini").string() + " --out " + (dir / "empty").string()) == 3);
}

TEST_CASE("binary: verify-transforms on the cube with seed 42")
{
  const fs::path dir = scratch("vt");
  spit(dir / "vt.json", R"({"run": {"seed": 42}, "geometry": {"domain": "unit_cube", "levels": 2},
                           "transform": {"samples": 2000}})");
  CHECK(run_binary("verify-transforms --config " + (dir / "vt.json").string() + " --out " + (dir / "out").string()) ==
        0);
  const std::string summary = slurp(dir / "out" / "summary.json");
  CHECK(summary.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("binary: identical config and seed give identical bytes")
{
  const fs::path dir = scratch("det");
  spit(dir / "p.ini", "[run]\nseed = 3\n[geometry]\nlevels = 2\n[loads]\npreset = manufactured\n[analysis]\ngrid = 64\nk_max = 5\n");
  for (const char* out : {"a", "b"})
    CHECK(run_binary("full-regularity --config " + (dir / "p.ini").string() + " --out " + (dir / out).string()) ==
          0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a"))
  {
    ++files;
    const fs::path other = dir / "b" / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().filename().string());
  }
  CHECK(files >= 5);
}
