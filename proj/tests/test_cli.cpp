#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("lbreg_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Runs the CLI with stdout captured; returns the exit status.
  int run(const std::string& args, std::string* out = nullptr) const {
    const std::string cmd =
        std::string("\"") + LBREG_CLI_PATH + "\" " + args + " > \"" + path("stdout") + "\" 2> \"" + path("stderr") + "\"";
    const int rc = std::system(cmd.c_str());
    if (out) *out = read("stdout");
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
};

}  // namespace

TEST_CASE("certify thresholds reports the alpha multiplier") {
  Sandbox sb;
  std::string out;
  REQUIRE(sb.run("certify thresholds --delta 0.4404 --alpha 10 --xsinf 1 --xzinf 1", &out) == 0);
  const json j = json::parse(out);
  CHECK(j["alpha_multiplier"].get<double>() == doctest::Approx(9.98486).epsilon(1e-5));
  CHECK(j["C3"].get<double>() == doctest::Approx(11.0 / 9.0));
  CHECK(j["C1"].is_null());
  CHECK_FALSE(j["stable_feasible"].get<bool>());
  for (const char* key : {"delta", "theta", "alpha_required", "C4", "C2", "C1bar", "C2bar"}) CHECK(j.contains(key));
}

TEST_CASE("certify rip and nu read CSV inputs") {
  Sandbox sb;
  sb.write("A.csv", "1,0,0\n0,1,0\n0,0,2\n");
  sb.write("x.csv", "1\n0\n0\n");
  std::string out;
  REQUIRE(sb.run("certify rip --matrix " + sb.path("A.csv") + " --k 1", &out) == 0);
  json j = json::parse(out);
  CHECK(j["delta_k"].get<double>() == doctest::Approx(3.0));
  CHECK(j["support_max"] == json::array({2}));

  REQUIRE(sb.run("certify nu --matrix " + sb.path("A.csv") + " --xstar " + sb.path("x.csv") + " --alpha 10", &out) == 0);
  j = json::parse(out);
  CHECK(j["lambda_A"].get<double>() == doctest::Approx(1.0));
  CHECK(j["nu"].get<double>() == doctest::Approx(10.0 / 21.0));
  CHECK(j["norm_A"].get<double>() == doctest::Approx(2.0));
}

TEST_CASE("solve writes the solution, trace and iterates") {
  Sandbox sb;
  sb.write("A.csv", "1,0,2\n0,1,-1\n");
  sb.write("b.csv", "2\n-1\n");
  std::string out;
  REQUIRE(sb.run("solve --matrix " + sb.path("A.csv") + " --rhs " + sb.path("b.csv") +
                     " --alpha 10 --variant kicking --tol 1e-9 --out " + sb.path("x.csv") + " --trace " +
                     sb.path("t.csv") + " --dump-iterates " + sb.path("it"),
                 &out) == 0);
  const json j = json::parse(out);
  CHECK(j["status"] == "converged");
  CHECK(j["variant"] == "kicking");
  CHECK(j["primal_residual"].get<double>() < 1e-9);
  const auto x = j["x"].get<std::vector<double>>();
  REQUIRE(x.size() == 3);
  CHECK(x[0] + 2.0 * x[2] == doctest::Approx(2.0));
  CHECK(sb.read("x.csv").size() > 0);
  CHECK(sb.read("t.csv").rfind("k,f,grad_norm,step,kicked,primal_residual\n", 0) == 0);
  CHECK(fs::exists(sb.path("it_y.csv")));
  CHECK(fs::exists(sb.path("it_x.csv")));
}

TEST_CASE("solve accepts an entry sampler") {
  Sandbox sb;
  sb.write("s.csv", "2,2\n0,0\n1,1\n0,1\n");
  sb.write("b.csv", "1\n1\n1\n");
  std::string out;
  REQUIRE(sb.run("solve --sampler " + sb.path("s.csv") + " --rhs " + sb.path("b.csv") + " --alpha 5 --tol 1e-9", &out) == 0);
  const json j = json::parse(out);
  CHECK(j["x_shape"] == json::array({2, 2}));
}

TEST_CASE("convergence and phase subcommands write CSVs") {
  Sandbox sb;
  std::string out;
  REQUIRE(sb.run("convergence --m 20 --n 40 --k 3 --kind flat --seed 3 --out " + sb.path("conv.csv"), &out) == 0);
  CHECK(json::parse(out)["solvers"].size() == 3);
  CHECK(sb.read("conv.csv").rfind("k,solver,x_err,y_err,f,grad_norm\n", 0) == 0);

  sb.write("phase.toml", "n = 20\nm_range = 6:10:4\nk_range = 1:2\ntrials = 2\nalphas = [10]\nthreads = 1\n");
  REQUIRE(sb.run("phase --config " + sb.path("phase.toml") + " --out " + sb.path("res"), &out) == 0);
  CHECK(json::parse(out)["trials"] == 8);
  for (const char* f : {"res/trials.csv", "res/timing.csv", "res/curves.csv", "res/cells.csv"}) {
    CHECK(fs::exists(sb.path(f)));
  }
  CHECK(sb.read("res/curves.csv").rfind("level,alpha,k,m_star\n", 0) == 0);
}

TEST_CASE("errors exit nonzero with a message") {
  Sandbox sb;
  sb.write("A.csv", "1,0\n0,1\n");
  sb.write("b.csv", "0\n0\n");
  CHECK(sb.run("solve --matrix " + sb.path("A.csv") + " --rhs " + sb.path("b.csv") + " --alpha 1") == 1);
  CHECK(sb.read("stderr").find("b must be nonzero") != std::string::npos);
  CHECK(sb.run("certify thresholds --delta 1.5 --alpha 10 --xsinf 1 --xzinf 0") == 1);
  CHECK(sb.run("certify rip --matrix " + sb.path("missing.csv") + " --k 1") != 0);
  CHECK(sb.run("bogus") != 0);
  CHECK(sb.run("solve --rhs " + sb.path("b.csv") + " --alpha 1") == 1);
}
