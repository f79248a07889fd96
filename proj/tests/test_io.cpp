#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "lbreg/error.hpp"
#include "lbreg/io.hpp"

using namespace lbreg;
using linalg::Matrix;
using linalg::Vector;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("lbreg_io_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("matrix CSV round trip") {
  TempDir dir;
  const Matrix a = Matrix::from_rows({{1.0, -2.0, 1.0 / 3.0}, {4e-17, 5.0, 6.25}});
  io::write_matrix_csv(a, dir.file("a.csv"));
  CHECK(io::read_matrix_csv(dir.file("a.csv")) == a);

  std::istringstream in("1, 2\n\n 3 ,4\r\n");
  CHECK(io::parse_matrix_csv(in) == Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
}

TEST_CASE("matrix CSV format errors") {
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(io::parse_matrix_csv(ragged), InvalidArgument);
  std::istringstream word("1,x\n");
  CHECK_THROWS_AS(io::parse_matrix_csv(word), InvalidArgument);
  std::istringstream empty("\n\n");
  CHECK_THROWS_AS(io::parse_matrix_csv(empty), InvalidArgument);
  std::istringstream nan("1,nan\n");
  CHECK_THROWS_AS(io::parse_matrix_csv(nan), InvalidArgument);
  CHECK_THROWS_AS(io::read_matrix_csv("/nonexistent/a.csv"), InvalidArgument);
}

TEST_CASE("vector CSV round trip") {
  TempDir dir;
  const Vector v{0.125, -3.0, 1e10};
  io::write_vector_csv(v, dir.file("v.csv"));
  CHECK(io::read_vector_csv(dir.file("v.csv")) == v);
  write_text(dir.file("w.csv"), "1,2\n");
  CHECK_THROWS_AS(io::read_vector_csv(dir.file("w.csv")), InvalidArgument);
}

TEST_CASE("sampler files") {
  TempDir dir;
  write_text(dir.file("s.csv"), "3,4\n0,0\n2,3\n1,1\n");
  const auto op = io::read_sampler(dir.file("s.csv"));
  CHECK(op.measurements() == 3);
  CHECK(op.primal_rows() == 3);
  CHECK(op.primal_cols() == 4);
  Matrix x(3, 4);
  x(2, 3) = 7.0;
  x(1, 1) = -1.0;
  CHECK(models::apply_op(op, models::PrimalPoint::matrix(x)) == Vector{0.0, 7.0, -1.0});

  write_text(dir.file("bad.csv"), "3,4\n5,0\n");
  CHECK_THROWS_AS(io::read_sampler(dir.file("bad.csv")), InvalidArgument);
  write_text(dir.file("neg.csv"), "3,4\n-1,0\n");
  CHECK_THROWS_AS(io::read_sampler(dir.file("neg.csv")), InvalidArgument);
  write_text(dir.file("three.csv"), "3,4,5\n");
  CHECK_THROWS_AS(io::read_sampler(dir.file("three.csv")), InvalidArgument);
}

TEST_CASE("trace-list files") {
  TempDir dir;
  write_text(dir.file("ops.csv"), "1,0\n0,1\n\n0,2\n3,0\n");
  write_text(dir.file("ops.idx"), "2,2,2\nops.csv\n");
  const auto op = io::read_trace_list(dir.file("ops.idx"));
  CHECK(op.measurements() == 2);
  const Matrix x = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(models::apply_op(op, models::PrimalPoint::matrix(x)) == Vector{5.0, 13.0});

  write_text(dir.file("short.idx"), "2,2,3\nops.csv\n");
  CHECK_THROWS_AS(io::read_trace_list(dir.file("short.idx")), InvalidArgument);
  write_text(dir.file("noname.idx"), "2,2,2\n");
  CHECK_THROWS_AS(io::read_trace_list(dir.file("noname.idx")), InvalidArgument);
  write_text(dir.file("wide.idx"), "2,3,1\nops.csv\n");
  CHECK_THROWS_AS(io::read_trace_list(dir.file("wide.idx")), InvalidArgument);
}

TEST_CASE("trace and iterate dumps") {
  TempDir dir;
  const models::Model model(models::SensingOperator::dense(Matrix::identity(1)), {1.0}, 1.0);
  solvers::SolverOptions opts;
  opts.variant = solvers::Variant::Kicking;
  opts.h = 0.01;
  opts.tol = 1e-8;
  const solvers::Trace t = solvers::solve(model, opts);

  std::ostringstream os;
  io::write_trace_csv(t, os);
  std::istringstream lines(os.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "k,f,grad_norm,step,kicked,primal_residual");
  std::string first;
  std::string second;
  std::string third;
  std::getline(lines, first);
  std::getline(lines, second);
  std::getline(lines, third);
  CHECK(first.rfind("0,", 0) == 0);
  CHECK(third.rfind("101,", 0) == 0);
  CHECK(third.find(",1,") != std::string::npos);

  io::write_iterates(t, dir.file("run"));
  std::ifstream ys(dir.file("run_y.csv"));
  std::size_t count = 0;
  std::string line;
  while (std::getline(ys, line)) ++count;
  CHECK(count == t.records.size());

  opts.keep_iterates = false;
  CHECK_THROWS_AS(io::write_iterates(solvers::solve(model, opts), dir.file("none")), InvalidArgument);
}
