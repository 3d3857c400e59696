#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

namespace {

using nlohmann::json;

struct RunResult {
  int exit_code;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  const std::string out_file = "/tmp/algebroid_cli_out.txt";
  const std::string cmd =
      std::string(CLI_PATH) + " " + args + " > " + out_file + " 2>/tmp/algebroid_cli_err.txt";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  return r;
}

std::string write_temp_model(const std::string& name, const json& doc) {
  const std::string path = "/tmp/" + name + ".json";
  std::ofstream out(path);
  out << doc.dump(2);
  return path;
}

json corpus_json(const std::string& name) {
  std::ifstream in(testsupport::model_path(name));
  json doc;
  in >> doc;
  return doc;
}

}  // namespace

TEST_CASE("cli validate: corpus passes, corruptions are detected") {
  for (const char* name : {"flat_tm1", "flat_tm2", "sphere_chart", "so3_killing",
                           "linebundle_X", "foliation_product"}) {
    const RunResult r = run_cli("validate " + testsupport::model_path(name));
    CHECK_MESSAGE(r.exit_code == 0, name);
    const json rep = json::parse(r.out);
    CHECK(rep.at("verdict") == "pass");
  }

  // bracket corruption on so(3): a spurious extra component in one bracket
  // ([e1,e2] = e1 + e3) breaks the Jacobi identity with residual 1
  json so3 = corpus_json("so3_killing");
  so3["bracket"].push_back({{"a", 1}, {"b", 2}, {"c", 1}, {"expr", "1"}});
  const RunResult bad_jacobi = run_cli("validate " + write_temp_model("so3_bad", so3));
  CHECK(bad_jacobi.exit_code == 1);
  const json rep = json::parse(bad_jacobi.out);
  CHECK(rep.at("verdict") == "fail");
  CHECK(rep.at("worst").at("residual") == "jacobi");
  CHECK(rep.at("axioms").at("jacobi_residual").get<double>() > 1e-2);

  // anchor corruption on the flat plane
  json tm2 = corpus_json("flat_tm2");
  tm2["anchor"][0][0] = "1 + 0.1*x2";
  const RunResult bad_anchor = run_cli("validate " + write_temp_model("tm2_bad", tm2));
  CHECK(bad_anchor.exit_code == 1);
  CHECK(json::parse(bad_anchor.out).at("axioms").at("anchor_morphism_residual").get<double>() >
        1e-2);

  // metric symmetry corruption via an explicit full matrix
  json sym = corpus_json("flat_tm2");
  sym["metric"] = json::array({json::array({"1", "0.1"}), json::array({"0", "1"})});
  const RunResult bad_sym = run_cli("validate " + write_temp_model("tm2_sym", sym));
  CHECK(bad_sym.exit_code == 1);
  CHECK(json::parse(bad_sym.out).at("axioms").at("metric_symmetry_residual").get<double>() >
        1e-2);

  // schema violation: symmetric bracket entries are an error, not fixed up
  json dup = corpus_json("so3_killing");
  dup["bracket"].push_back({{"a", 2}, {"b", 1}, {"c", 3}, {"expr", "-1"}});
  CHECK(run_cli("validate " + write_temp_model("so3_dup", dup)).exit_code == 2);

  // unknown function in an expression: schema error with a byte offset
  json badexpr = corpus_json("flat_tm2");
  badexpr["metric"] = json::array({json::array({"foo(x1)", "0"}), json::array({"1"})});
  CHECK(run_cli("validate " + write_temp_model("tm2_expr", badexpr)).exit_code == 2);
}

TEST_CASE("cli geodesic: flat translation and the vertical flag") {
  const RunResult r = run_cli("geodesic " + testsupport::model_path("flat_tm1") +
                              " --x0 0 --pi0 1 --t-end 1 --h 0.001 --out /tmp/traj.csv"
                              " --report /tmp/rep.json");
  CHECK(r.exit_code == 0);
  // last CSV row: t = 1, x = 1
  std::ifstream csv("/tmp/traj.csv");
  std::string line, last;
  std::getline(csv, line);  // header
  CHECK(line == "t,x1,pi_e1,H,admissibility");
  while (std::getline(csv, line))
    if (!line.empty()) last = line;
  std::stringstream ss(last);
  std::string cell;
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(1.0));
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(1e-10));

  const json rep = json::parse(slurp("/tmp/rep.json"));
  CHECK(rep.at("energy_drift").get<double>() < 1e-12);

  const RunResult vert = run_cli("geodesic " + testsupport::model_path("so3_killing") +
                                 " --y0 1,0,0 --t-end 1 --h 0.01 --out /tmp/t2.csv"
                                 " --report /tmp/rep2.json");
  CHECK(vert.exit_code == 0);
  CHECK(json::parse(slurp("/tmp/rep2.json")).at("vertical") == true);
}

TEST_CASE("cli killing: check and find") {
  const RunResult check = run_cli("killing " + testsupport::model_path("so3_killing") +
                                  " check --section E1");
  CHECK(check.exit_code == 0);
  CHECK(json::parse(check.out).at("killing") == true);

  const RunResult dil = run_cli("killing " + testsupport::model_path("flat_tm2") +
                                " check --section dilation");
  CHECK(dil.exit_code == 0);
  const json drep = json::parse(dil.out);
  CHECK(drep.at("killing") == false);
  CHECK(drep.at("residual_lemma").get<double>() == doctest::Approx(2.0));

  const RunResult find = run_cli("killing " + testsupport::model_path("flat_tm2") +
                                 " find --degree 1");
  CHECK(find.exit_code == 0);
  const json frep = json::parse(find.out);
  CHECK(frep.at("dimension") == 3);
  CHECK(frep.at("bound") == 3);
  CHECK(frep.at("gap_ratio").get<double>() > 1e4);

  // underdetermined discovery is refused with the schema exit code
  const RunResult under = run_cli("killing " + testsupport::model_path("linebundle_X") +
                                  " find --degree 12 --grid 3");
  CHECK(under.exit_code == 2);
}

TEST_CASE("cli sigma: solve, residual, charged") {
  const std::string tm2 = testsupport::model_path("flat_tm2");
  const RunResult solve = run_cli("sigma " + tm2 +
                                  " solve --phi0 0,0 --phi1 1,1 --nodes 101"
                                  " --csv /tmp/cfg.csv --log /tmp/log.csv --out /tmp/solve.json");
  CHECK(solve.exit_code == 0);
  const json srep = json::parse(slurp("/tmp/solve.json"));
  CHECK(srep.at("action").get<double>() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(srep.at("converged") == true);

  const RunResult resid = run_cli("sigma " + tm2 + " residual --config /tmp/cfg.csv --nodes 101");
  CHECK(resid.exit_code == 0);
  CHECK(json::parse(resid.out).at("max_tension").get<double>() < 1e-6);

  const RunResult noether = run_cli("sigma " + tm2 +
                                    " noether --config /tmp/cfg.csv --nodes 101 --section dx");
  CHECK(noether.exit_code == 0);
  CHECK(json::parse(noether.out).at("divergence").get<double>() < 1e-8);

  const RunResult charged = run_cli("sigma " + tm2 +
                                    " charged --x0 0,0 --chi0 0.5,0 --t-end 6.28 --h 0.001"
                                    " --section dy --csv /tmp/charged.csv --out /tmp/charged.json");
  CHECK(charged.exit_code == 0);
  const json crep = json::parse(slurp("/tmp/charged.json"));
  CHECK(crep.at("field_strength_antisymmetry").get<double>() < 1e-12);
  CHECK(crep.at("lie_derivative_oneform_residual").get<double>() < 1e-12);
  CHECK(crep.at("noether_drift").get<double>() < 1e-8);
}

TEST_CASE("cli determinism and seed override") {
  const std::string path = testsupport::model_path("sphere_chart");
  const RunResult a = run_cli("validate " + path);
  const RunResult b = run_cli("validate " + path);
  CHECK(a.out == b.out);

  const RunResult c = run_cli("killing " + path + " check --section rot_x --seed 7");
  CHECK(json::parse(c.out).at("seed") == 7);

  // environment override
  const std::string cmd = std::string("ALGEBROID_LAB_SEED=123 ") + CLI_PATH + " validate " +
                          path + " > /tmp/env_seed.json 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(json::parse(slurp("/tmp/env_seed.json")).at("seed") == 123);
}
