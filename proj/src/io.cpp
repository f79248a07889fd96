#include "lbreg/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lbreg/error.hpp"

namespace lbreg::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

double parse_real(const std::string& s, const std::string& source, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument(source + ":" + std::to_string(line) + ": '" + s + "' is not a number");
  }
  if (!std::isfinite(v)) throw InvalidArgument(source + ":" + std::to_string(line) + ": non-finite value");
  return v;
}

std::size_t parse_index(const std::string& s, const std::string& source, int line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument(source + ":" + std::to_string(line) + ": '" + s + "' is not a nonnegative integer");
  }
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  return out;
}

// Reads `rows` non-blank lines of a matrix (all of them when rows == 0).
Matrix read_rows(std::istream& in, std::size_t rows, const std::string& source, int& line) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t got = 0;
  std::string text;
  while ((rows == 0 || got < rows) && std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    const auto fields = split_fields(text);
    if (got == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw InvalidArgument(source + ":" + std::to_string(line) + ": expected " + std::to_string(cols) + " columns");
    }
    for (const auto& f : fields) data.push_back(parse_real(f, source, line));
    ++got;
  }
  if (got == 0) throw InvalidArgument(source + ": no data");
  if (rows != 0 && got != rows) throw InvalidArgument(source + ": expected " + std::to_string(rows) + " more rows");
  return Matrix(got, cols, std::move(data));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Matrix parse_matrix_csv(std::istream& in, const std::string& source) {
  int line = 0;
  return read_rows(in, 0, source, line);
}

Matrix read_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  return parse_matrix_csv(in, path);
}

void write_matrix_csv(const Matrix& a, std::ostream& out) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out << (j ? "," : "") << format_double(a(i, j));
    out << '\n';
  }
}

void write_matrix_csv(const Matrix& a, const std::string& path) {
  auto out = open_out(path);
  write_matrix_csv(a, out);
}

Vector read_vector_csv(const std::string& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) throw InvalidArgument(path + ": a vector file has exactly one column");
  return Vector(m.values().begin(), m.values().end());
}

void write_vector_csv(linalg::ConstSpan v, std::ostream& out) {
  for (double x : v) out << format_double(x) << '\n';
}

void write_vector_csv(linalg::ConstSpan v, const std::string& path) {
  auto out = open_out(path);
  write_vector_csv(v, out);
}

models::SensingOperator read_sampler(const std::string& path) {
  auto in = open_in(path);
  std::string text;
  int line = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool have_dims = false;
  std::vector<std::pair<std::size_t, std::size_t>> omega;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    const auto f = split_fields(text);
    if (f.size() != 2) throw InvalidArgument(path + ":" + std::to_string(line) + ": expected two fields");
    const std::size_t a = parse_index(f[0], path, line);
    const std::size_t b = parse_index(f[1], path, line);
    if (!have_dims) {
      n1 = a;
      n2 = b;
      have_dims = true;
    } else {
      omega.emplace_back(a, b);
    }
  }
  if (!have_dims) throw InvalidArgument(path + ": missing the n1,n2 line");
  return models::SensingOperator::entry_sampler(n1, n2, std::move(omega));
}

models::SensingOperator read_trace_list(const std::string& index_path) {
  auto in = open_in(index_path);
  std::string dims;
  std::string data_name;
  int line = 0;
  while (dims.empty() && std::getline(in, dims)) {
    ++line;
    if (blank(dims)) dims.clear();
  }
  while (data_name.empty() && std::getline(in, data_name)) {
    if (blank(data_name)) data_name.clear();
  }
  const auto f = split_fields(dims);
  if (f.size() != 3) throw InvalidArgument(index_path + ": first line must be n1,n2,m");
  const std::size_t n1 = parse_index(f[0], index_path, line);
  const std::size_t n2 = parse_index(f[1], index_path, line);
  const std::size_t m = parse_index(f[2], index_path, line);
  if (n1 == 0 || n2 == 0 || m == 0) throw InvalidArgument(index_path + ": sizes must be positive");
  const auto b = data_name.find_first_not_of(" \t\r");
  const auto e = data_name.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw InvalidArgument(index_path + ": missing the data file name");
  const std::filesystem::path data =
      std::filesystem::path(index_path).parent_path() / data_name.substr(b, e - b + 1);

  auto din = open_in(data.string());
  std::vector<Matrix> mats;
  int dline = 0;
  for (std::size_t i = 0; i < m; ++i) {
    Matrix block = read_rows(din, n1, data.string(), dline);
    if (block.cols() != n2) throw InvalidArgument(data.string() + ": block " + std::to_string(i) + " has the wrong width");
    mats.push_back(std::move(block));
  }
  return models::SensingOperator::trace_list(std::move(mats));
}

void write_trace_csv(const solvers::Trace& trace, std::ostream& out) {
  out << "k,f,grad_norm,step,kicked,primal_residual\n";
  for (const auto& r : trace.records) {
    out << r.k << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ',' << format_double(r.step) << ','
        << (r.kicked ? 1 : 0) << ',' << format_double(r.primal_residual) << '\n';
  }
}

void write_trace_csv(const solvers::Trace& trace, const std::string& path) {
  auto out = open_out(path);
  write_trace_csv(trace, out);
}

void write_iterates(const solvers::Trace& trace, const std::string& prefix) {
  auto ys = open_out(prefix + "_y.csv");
  auto xs = open_out(prefix + "_x.csv");
  for (const auto& r : trace.records) {
    if (r.y.empty()) throw InvalidArgument("write_iterates: the trace kept no iterates");
    ys << r.k;
    for (double v : r.y) ys << ',' << format_double(v);
    ys << '\n';
    xs << r.k;
    for (double v : r.x.values()) xs << ',' << format_double(v);
    xs << '\n';
  }
}

}  // namespace lbreg::io
