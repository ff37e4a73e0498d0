#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bv/model_io.hpp"

using namespace bv;

namespace {

std::string bin() {
  const char* b = std::getenv("BVCHECK_BIN");
  REQUIRE(b != nullptr);
  return b;
}

std::string models_dir() {
  const char* d = std::getenv("BV_MODELS_DIR");
  REQUIRE(d != nullptr);
  return std::string(d) + "/";
}

struct RunResult {
  int exit_code;
  std::string stdout_text;
};

RunResult run(const std::string& args) {
  std::string cmd = bin() + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  int status = pclose(p);
  return {WEXITSTATUS(status), out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::ordered_json report_without_timing(const std::string& path) {
  auto j = nlohmann::ordered_json::parse(slurp(path));
  j.erase("timing_ms");
  return j;
}

}  // namespace

TEST_CASE("exit code contract") {
  CHECK(run("check cme " + models_dir() + "bv_so3.json").exit_code == 0);
  CHECK(run("check cme " + models_dir() + "bv_so3_mutated.json").exit_code == 1);
  CHECK(run("check cme " + models_dir() + "does_not_exist.json").exit_code == 2);
  CHECK(run("check observables " + models_dir() + "bv_so3.json").exit_code == 2);  // missing O*
  CHECK(run("check nosuchsuite " + models_dir() + "bv_so3.json").exit_code == 2);
}

TEST_CASE("qme suite reports the violation order") {
  auto r = run("check qme " + models_dir() + "qme_mutant.json --json /tmp/bv_qme.json");
  CHECK(r.exit_code == 1);
  auto j = report_without_timing("/tmp/bv_qme.json");
  CHECK(j["checks"][0]["status"] == "violation");
  CHECK(j["checks"][0]["order"] == 1);
  CHECK(j["checks"][0].contains("witness"));
}

TEST_CASE("observables suite") {
  auto r = run("check observables " + models_dir() + "explicit_rotation.json --json /tmp/bv_obs.json");
  CHECK(r.exit_code == 1);  // O2 = p1 is not an observable
  auto j = report_without_timing("/tmp/bv_obs.json");
  bool saw_pass = false, saw_violation = false;
  for (auto& c : j["checks"]) {
    if (c["name"] == "O1") saw_pass = c["status"] == "pass";
    if (c["name"] == "O2") saw_violation = c["status"] == "violation";
  }
  CHECK(saw_pass);
  CHECK(saw_violation);
}

TEST_CASE("determinism: identical reports modulo timing") {
  std::string m = models_dir() + "cs_heisenberg_so3.json";
  CHECK(run("check linfty " + m + " --json /tmp/bv_d1.json").exit_code == 0);
  CHECK(run("check linfty " + m + " --json /tmp/bv_d2.json").exit_code == 0);
  CHECK(report_without_timing("/tmp/bv_d1.json") == report_without_timing("/tmp/bv_d2.json"));
}

TEST_CASE("golden files round-trip byte-identically") {
  const char* names[] = {"bv_so3.json",         "bv_so3_mutated.json",
                         "bv_abelian.json",     "cs_superpoint_so3.json",
                         "cs_heisenberg_so3.json", "pform_circle3.json",
                         "explicit_cubic.json", "explicit_rotation.json",
                         "qme_mutant.json"};
  for (const char* n : names) {
    std::string bytes = slurp(models_dir() + n);
    io::ModelFile mf = io::parse_model(bytes);
    std::string emitted = io::emit_model(mf);
    CHECK(emitted == bytes);
    io::ModelFile again = io::parse_model(emitted);
    CHECK(io::emit_model(again) == emitted);
    CHECK(again.model.S == mf.model.S);
  }
}

TEST_CASE("explicit constructor kind is an alias") {
  std::string bytes = slurp(models_dir() + "explicit_cubic.json");
  io::ModelFile mf = io::parse_model(bytes);
  auto j = nlohmann::ordered_json::parse(bytes);
  j["constructor"] = {{"kind", "explicit"}};
  io::ModelFile alias = io::parse_model(j.dump());
  CHECK(alias.model.S == mf.model.S);
}

TEST_CASE("parse errors carry a path") {
  CHECK_THROWS_AS(io::parse_model("{}"), io::ParseError);
  // Grading violation in an explicit pair.
  std::string bad = R"({"version":"1","chart":{"pairs":[
    {"field":{"name":"x","ghost":0},"antifield":{"name":"y","ghost":0}}]}})";
  try {
    io::parse_model(bad);
    CHECK(false);
  } catch (const io::ParseError& e) {
    CHECK(std::string(e.what()).find("gh(antifield)") != std::string::npos);
  }
  // Negative hbar power rejected.
  std::string neg = R"({"version":"1","chart":{"pairs":[
    {"field":{"name":"x","ghost":0},"antifield":{"name":"x+","ghost":-1}}]},
    "polynomials":{"S":[{"hbar_power":-1,"coeff":[1,1,0,1],"monomial":[["x",2]]}]}})";
  CHECK_THROWS_AS(io::parse_model(neg), io::ParseError);
}

TEST_CASE("integral and zinn-justin suites run on the cubic toy") {
  CHECK(run("check integral " + models_dir() + "explicit_cubic.json").exit_code == 0);
  CHECK(run("check zinn-justin " + models_dir() + "explicit_cubic.json --loop-cap 1 --hbar-cap 1")
            .exit_code == 0);
}

TEST_CASE("threads env var leaves results bit-identical") {
  std::string m = models_dir() + "explicit_cubic.json";
  CHECK(run("check integral " + m + " --json /tmp/bv_t1.json").exit_code == 0);
  setenv("BV_THREADS", "4", 1);
  std::string cmd = "BV_THREADS=4 " + bin() + " check integral " + m + " --json /tmp/bv_t2.json";
  CHECK(std::system((cmd + " >/dev/null 2>&1").c_str()) == 0);
  CHECK(report_without_timing("/tmp/bv_t1.json") == report_without_timing("/tmp/bv_t2.json"));
}
