#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "slag/error.hpp"
#include "slag/experiments.hpp"
#include "slag/field_io.hpp"

using namespace slag;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("slag-lab-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int run(const ExperimentConfig& cfg, std::string* log = nullptr) {
  std::ostringstream os;
  const int code = run_experiment(cfg, os);
  if (log) *log = os.str();
  return code;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse(
      "# rotation of a quadratic\n"
      "name = demo\n"
      "[grid]\n"
      "dim = 3 ; trailing comment\n"
      "grid = 16\n"
      "formula = quad:2\n"
      "theta = 0.5\n"
      "mollifiers = 2h, 4h, 0.5\n"
      "audits = super, rotation-sub\n"
      "tolerance = 1e-4\n");
  CHECK(c.name == "demo");
  CHECK(c.dim == 3);
  CHECK(c.problem.dim == 3);
  CHECK(c.h == doctest::Approx(1.0 / 16));
  CHECK(c.formula == "quad:2");
  CHECK(c.problem.theta == doctest::Approx(0.5));
  REQUIRE(c.mollifiers.size() == 3);
  CHECK(c.mollifiers[0] == doctest::Approx(0.125));
  CHECK(c.mollifiers[1] == doctest::Approx(0.25));
  CHECK(c.mollifiers[2] == doctest::Approx(0.5));
  CHECK(c.audits == std::vector<std::string>{"super", "rotation-sub"});
  CHECK(c.jet.tolerance == doctest::Approx(1e-4));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse("h = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse("h 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse("grid = -4\n"), ConfigError);
  CHECK_THROWS_AS(parse("variant = slg\n"), ConfigError);
  try {
    parse("name = x\n\nbogus = 1\n");
    FAIL("no error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_file("/nonexistent/slag.cfg"), ConfigError);

  const auto invalid = [](const std::string& text) { CHECK_THROWS_AS(parse(text).validate(), ConfigError); };
  invalid("audits = super\n");                              // no field
  invalid("formula = zero\nfield = x.pf1\n");                // both
  invalid("formula = nope\n");                               // unknown formula
  invalid("field = /nonexistent/u.pf1\n");                   // missing file
  invalid("formula = zero\ndim = 4\n");                      // dimension
  invalid("formula = zero\ntheta = 4\n");                    // phase range
  invalid("formula = zero\nalpha = 2\n");                    // angle
  invalid("formula = zero\nmollifiers = 1h\n");              // below 2h
  invalid("formula = zero\naudits = super, magic\n");        // unknown audit
  invalid("formula = zero\naudits = rotation-sub\n");        // needs mollifiers
  invalid("formula = zero\nm = 3\n");                        // m range
  invalid("formula = zero\ntolerance = 0\n");                // jet tolerance
  invalid("builtin = no-such-run\n");
  CHECK_THROWS_AS(find_builtin("no-such-run"), ConfigError);
}

TEST_CASE("builtin formulas") {
  // Names are listed with a placeholder parameter, as in `quad:K`.
  for (const std::string& name : builtin_formula_names())
    if (name.find(':') == std::string::npos) CHECK_NOTHROW(builtin_formula(name));
  for (const char* name : {"quad:2", "quartic-x1:0.2", "radial-quartic:0.1", "mixed:0.1", "partial-legendre:0.3"})
    CHECK_NOTHROW(builtin_formula(name));
  CHECK(builtin_formula("quad:3")({1.0, 1.0, 0.0}) == doctest::Approx(3.0));
  CHECK(builtin_formula("x1x2")({2.0, 3.0, 0.0}) == doctest::Approx(6.0));
  CHECK_THROWS_AS(builtin_formula("quad"), ConfigError);
  CHECK_THROWS_AS(builtin_formula("quad:abc"), ConfigError);
  CHECK_THROWS_AS(builtin_formula("partial-legendre:1.5"), ConfigError);
  CHECK_THROWS_AS(builtin_formula("cubic"), ConfigError);
}

TEST_CASE("registry mirrors the acceptance list") {
  const auto& all = builtin_experiments();
  REQUIRE(all.size() == 13);
  CHECK(all[0].name == "quadratic-rotation");
  CHECK(all[1].name == "zero-potential");
  CHECK(all[2].name == "ma-duality");
  const auto acc = acceptance_experiments();
  REQUIRE(acc.size() == 10);
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == &all[i + 3]);
}

TEST_CASE("run_experiment exit codes and artifacts") {
  ExperimentConfig ok = parse("name = ok\ngrid = 16\nformula = quad:1\ntheta = 1.5707963267948966\n"
                              "audits = super, sub, rotation-super\n");
  ok.out_dir = scratch("ok");
  std::string log;
  CHECK(run(ok, &log) == 0);
  CHECK(log.find("ok: passed") != std::string::npos);
  CHECK(fs::exists(ok.out_dir / "u.pf1"));
  CHECK(fs::exists(ok.out_dir / "supersolution.json"));
  const std::string csv = slurp(ok.out_dir / "summary.csv");
  CHECK(csv.rfind("name,checked_nodes,min_margin,passed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("false") == std::string::npos);
  const PotentialField u = read_field(ok.out_dir / "u.pf1");
  CHECK(u.grid.spacing == doctest::Approx(1.0 / 16));

  ExperimentConfig bad_audit = ok;
  bad_audit.problem.theta = 0.0;
  bad_audit.audits = {"super"};
  bad_audit.out_dir = scratch("fail");
  CHECK(run(bad_audit) == 1);
  CHECK(slurp(bad_audit.out_dir / "summary.csv").find("false") != std::string::npos);

  ExperimentConfig bad_compute = ok;
  bad_compute.problem.theta = 0.0;  // not a supersolution, so the rotation check refuses
  bad_compute.audits = {"rotation-super"};
  bad_compute.out_dir = scratch("compute");
  CHECK(run(bad_compute, &log) == 1);
  CHECK(log.find("error:") != std::string::npos);

  ExperimentConfig bad_config = ok;
  bad_config.audits = {"magic"};
  bad_config.out_dir = scratch("config");
  CHECK(run(bad_config, &log) == 2);
  CHECK(log.find("config error") != std::string::npos);
  CHECK_FALSE(fs::exists(bad_config.out_dir));
}

TEST_CASE("demonstration builtins pass") {
  for (const char* name : {"quadratic-rotation", "zero-potential", "ma-duality"}) {
    CAPTURE(name);
    ExperimentConfig c;
    c.builtin = name;
    c.out_dir = scratch(name);
    CHECK(run(c) == 0);
    CHECK(fs::exists(c.out_dir / "summary.csv"));
  }
  const ExperimentOutcome q = find_builtin("quadratic-rotation").run({});
  REQUIRE(q.audits.size() == 1);
  CHECK(q.audits[0].passed);
  CHECK(q.audits[0].checked_nodes > 0);
}

TEST_CASE("identical configs produce byte-identical reports") {
  ExperimentConfig c = parse("name = det\ngrid = 16\nformula = quartic\ntheta = 1.5\nsolve = true\n"
                             "audits = super, hessian-bound, bm, coeffs\nseed = 5\n");
  c.out_dir = scratch("det-a");
  REQUIRE(run(c) <= 1);
  const fs::path a = c.out_dir;
  c.out_dir = scratch("det-b");
  REQUIRE(run(c) <= 1);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(c.out_dir / entry.path().filename()));
  }
  CHECK(files >= 6);
}
