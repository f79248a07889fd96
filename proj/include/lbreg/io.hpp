#pragma once

// Plain-text exchange formats.
//
//   matrix      header-free CSV, one line per row
//   vector      single-column CSV
//   sampler     first line "n1,n2", then one "i,j" line per observed entry
//   trace list  index file with "n1,n2,m" on the first line and the data
//               file name (relative to the index) on the second; the data
//               file stacks the m matrices, n1 lines each
//   trace       k,f,grad_norm,step,kicked,primal_residual

#include <iosfwd>
#include <string>

#include "lbreg/models.hpp"
#include "lbreg/solvers.hpp"

namespace lbreg::io {

using linalg::Matrix;
using linalg::Vector;

Matrix parse_matrix_csv(std::istream& in, const std::string& source = "<stream>");
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& a, std::ostream& out);
void write_matrix_csv(const Matrix& a, const std::string& path);

Vector read_vector_csv(const std::string& path);
void write_vector_csv(linalg::ConstSpan v, std::ostream& out);
void write_vector_csv(linalg::ConstSpan v, const std::string& path);

models::SensingOperator read_sampler(const std::string& path);
models::SensingOperator read_trace_list(const std::string& index_path);

void write_trace_csv(const solvers::Trace& trace, std::ostream& out);
void write_trace_csv(const solvers::Trace& trace, const std::string& path);

/// Writes <prefix>_y.csv and <prefix>_x.csv with one "k,values..." line per
/// record (x is flattened row-major for matrix models).
void write_iterates(const solvers::Trace& trace, const std::string& prefix);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace lbreg::io
