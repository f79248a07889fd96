// Command-line front end: phase sweeps, convergence traces, single solves and
// certificate reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lbreg/certificates.hpp"
#include "lbreg/error.hpp"
#include "lbreg/harness.hpp"
#include "lbreg/io.hpp"

namespace {

using json = nlohmann::json;
using namespace lbreg;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  return out;
}

struct PhaseArgs {
  std::string config;
  std::string out = ".";
  bool paper_scale = false;
  std::optional<unsigned> threads;
};

void run_phase_cmd(const PhaseArgs& args) {
  harness::ExperimentConfig cfg =
      args.paper_scale ? harness::ExperimentConfig::paper_scale() : harness::ExperimentConfig::desk_scale();
  if (!args.config.empty()) cfg = harness::load_config(args.config);
  if (args.threads) cfg.threads = *args.threads;
  cfg.validate();

  const harness::PhaseResult r = harness::run_phase(cfg);
  const std::filesystem::path dir(args.out);
  std::filesystem::create_directories(dir);
  {
    auto f = open_out(dir / "trials.csv");
    harness::write_trials_csv(r, f);
  }
  {
    auto f = open_out(dir / "timing.csv");
    harness::write_timing_csv(r, f);
  }
  {
    auto f = open_out(dir / "curves.csv");
    harness::write_curves_csv(r, f);
  }
  {
    auto f = open_out(dir / "cells.csv");
    harness::write_cells_csv(r, f);
  }
  std::size_t converged = 0;
  for (const auto& t : r.trials) converged += t.converged;
  std::cout << json{{"trials", r.trials.size()},
                    {"converged", converged},
                    {"cells", r.cells.size()},
                    {"out", dir.string()}}
                   .dump(2)
            << '\n';
}

struct ConvArgs {
  std::size_t m = 64;
  std::size_t n = 128;
  std::size_t k = 12;
  std::string kind = "gaussian";
  double alpha_mult = 10.0;
  std::uint64_t seed = 7;
  std::string out = "conv.csv";
  harness::ConvergenceOptions opts;
};

void run_convergence_cmd(const ConvArgs& args) {
  const harness::ConvergenceRun r = harness::run_convergence(args.m, args.n, args.k, harness::parse_signal_kind(args.kind),
                                                             args.alpha_mult, args.seed, args.opts);
  {
    auto f = open_out(args.out);
    harness::write_conv_csv(r, f);
  }
  json solvers = json::object();
  for (const auto& t : r.traces) {
    solvers[solvers::to_string(t.variant)] = {{"iterations", t.iterations},
                                              {"evaluations", t.evaluations},
                                              {"converged", t.status == solvers::Status::Converged},
                                              {"final_k", t.records.back().k}};
  }
  std::cout << json{{"alpha", r.alpha}, {"solvers", solvers}, {"out", args.out}}.dump(2) << '\n';
}

struct SolveArgs {
  std::string matrix;
  std::string sampler;
  std::string trace_list;
  std::string rhs;
  double alpha = 0.0;
  double sigma = 0.0;
  std::string variant = "bb";
  double tol = 1e-6;
  long max_iter = 100000;
  std::optional<double> h;
  std::string out;
  std::string trace;
  std::string dump_iterates;
};

void run_solve_cmd(const SolveArgs& args) {
  const int sources = !args.matrix.empty() + !args.sampler.empty() + !args.trace_list.empty();
  if (sources != 1) throw InvalidArgument("solve: give exactly one of --matrix, --sampler, --trace-list");
  const models::SensingOperator op = !args.matrix.empty()   ? models::SensingOperator::dense(io::read_matrix_csv(args.matrix))
                                     : !args.sampler.empty() ? io::read_sampler(args.sampler)
                                                             : io::read_trace_list(args.trace_list);
  const models::Model model(op, io::read_vector_csv(args.rhs), args.alpha, args.sigma);

  solvers::SolverOptions opts;
  opts.variant = solvers::parse_variant(args.variant);
  opts.tol = args.tol;
  opts.max_iter = args.max_iter;
  opts.h = args.h;
  opts.keep_iterates = !args.dump_iterates.empty();
  const solvers::Trace t = solvers::solve(model, opts);

  if (!args.out.empty()) {
    if (t.x.is_matrix()) {
      io::write_matrix_csv(t.x.as_matrix(), args.out);
    } else {
      io::write_vector_csv(t.x.values(), args.out);
    }
  }
  if (!args.trace.empty()) io::write_trace_csv(t, args.trace);
  if (!args.dump_iterates.empty()) io::write_iterates(t, args.dump_iterates);

  const auto& last = t.records.back();
  json report{{"variant", solvers::to_string(t.variant)},
              {"status", t.status == solvers::Status::Converged ? "converged" : "max_iter"},
              {"iterations", t.iterations},
              {"evaluations", t.evaluations},
              {"h", t.h},
              {"f", last.f},
              {"grad_norm", last.grad_norm},
              {"primal_residual", last.primal_residual},
              {"x", std::vector<double>(t.x.values().begin(), t.x.values().end())},
              {"y", t.y}};
  if (t.x.is_matrix()) report["x_shape"] = {t.x.rows(), t.x.cols()};
  std::cout << report.dump(2) << '\n';
}

json rip_json(const certificates::RipReport& r) {
  return {{"k", r.k},
          {"delta_k", r.delta_k},
          {"lambda_min", r.lambda_min},
          {"lambda_max", r.lambda_max},
          {"support_min", r.support_min},
          {"support_max", r.support_max}};
}

json nu_json(const certificates::StrongConvexityReport& r) {
  return {{"lambda_A", r.lambda_A}, {"nu", r.nu},       {"L", r.L},         {"h_star", r.h_star},
          {"decay_factor", r.decay_factor}, {"omega", r.omega}, {"kappa", r.kappa}, {"norm_A", r.norm_A},
          {"alpha", r.alpha}};
}

json thresholds_json(const certificates::RecoveryThresholds& t) {
  return {{"delta", t.delta},
          {"theta", t.theta},
          {"alpha_multiplier", optional_json(t.alpha_multiplier)},
          {"alpha_required", optional_json(t.alpha_required)},
          {"C3", t.C3},
          {"C4", t.C4},
          {"C1", optional_json(t.C1)},
          {"C2", optional_json(t.C2)},
          {"C1bar", optional_json(t.C1bar)},
          {"C2bar", optional_json(t.C2bar)},
          {"stable_feasible", t.stable_feasible()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linearized Bregman solvers, recovery certificates and experiments"};
  app.require_subcommand(1);

  PhaseArgs phase;
  auto* phase_cmd = app.add_subcommand("phase", "Phase-transition sweep");
  auto* config_opt = phase_cmd->add_option("--config", phase.config, "Key-value experiment file")->check(CLI::ExistingFile);
  phase_cmd->add_option("--out", phase.out, "Output directory")->capture_default_str();
  phase_cmd->add_flag("--paper-scale", phase.paper_scale, "n=400, m=40..200, k=1..80, 100 trials")->excludes(config_opt);
  phase_cmd->add_option("--threads", phase.threads, "Worker threads (0 = all cores)");

  ConvArgs conv;
  auto* conv_cmd = app.add_subcommand("convergence", "Fixed, kicking and BB traces on one instance");
  conv_cmd->add_option("--m", conv.m)->capture_default_str();
  conv_cmd->add_option("--n", conv.n)->capture_default_str();
  conv_cmd->add_option("--k", conv.k)->capture_default_str();
  conv_cmd->add_option("--kind", conv.kind, "flat, gaussian or powerlaw")->capture_default_str();
  conv_cmd->add_option("--alpha-mult", conv.alpha_mult, "alpha as a multiple of ||x0||_inf")->capture_default_str();
  conv_cmd->add_option("--seed", conv.seed)->capture_default_str();
  conv_cmd->add_option("--tol", conv.opts.tol)->capture_default_str();
  conv_cmd->add_option("--max-iter", conv.opts.max_iter)->capture_default_str();
  conv_cmd->add_option("--out", conv.out, "Trace CSV")->capture_default_str();

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Run one solver on a problem read from CSV files");
  solve_cmd->add_option("--matrix", solve.matrix, "Dense sensing matrix CSV");
  solve_cmd->add_option("--sampler", solve.sampler, "Entry-sampling file (n1,n2 then i,j lines)");
  solve_cmd->add_option("--trace-list", solve.trace_list, "Trace-operator index file");
  solve_cmd->add_option("--rhs", solve.rhs, "Measurement vector CSV")->required();
  solve_cmd->add_option("--alpha", solve.alpha)->required();
  solve_cmd->add_option("--sigma", solve.sigma, "Noise level (0 for equality constraints)")->capture_default_str();
  solve_cmd->add_option("--variant", solve.variant, "fixed, kicking or bb")->capture_default_str();
  solve_cmd->add_option("--tol", solve.tol)->capture_default_str();
  solve_cmd->add_option("--max-iter", solve.max_iter)->capture_default_str();
  solve_cmd->add_option("--step", solve.h, "Step size (default 1/L)");
  solve_cmd->add_option("--out", solve.out, "Write the solution to this CSV");
  solve_cmd->add_option("--trace", solve.trace, "Write the per-iteration trace CSV");
  solve_cmd->add_option("--dump-iterates", solve.dump_iterates, "Write <prefix>_y.csv and <prefix>_x.csv");

  auto* certify_cmd = app.add_subcommand("certify", "Certificate reports as JSON");
  certify_cmd->require_subcommand(1);

  std::string rip_matrix;
  std::size_t rip_k = 0;
  double rip_cap = certificates::kDefaultSupportCap;
  auto* rip_cmd = certify_cmd->add_subcommand("rip", "Exact RIP constant by support enumeration");
  rip_cmd->add_option("--matrix", rip_matrix)->required()->check(CLI::ExistingFile);
  rip_cmd->add_option("--k", rip_k)->required();
  rip_cmd->add_option("--cap", rip_cap, "Largest number of supports to enumerate")->capture_default_str();

  std::string nu_matrix;
  std::string nu_xstar;
  double nu_alpha = 0.0;
  auto* nu_cmd = certify_cmd->add_subcommand("nu", "Restricted strong convexity constant");
  nu_cmd->add_option("--matrix", nu_matrix)->required()->check(CLI::ExistingFile);
  nu_cmd->add_option("--xstar", nu_xstar)->required()->check(CLI::ExistingFile);
  nu_cmd->add_option("--alpha", nu_alpha)->required();

  double th_delta = 0.0;
  double th_alpha = 0.0;
  double th_xs = 0.0;
  double th_xz = 0.0;
  std::optional<double> th_xinf;
  auto* th_cmd = certify_cmd->add_subcommand("thresholds", "theta, alpha threshold and stable-recovery constants");
  th_cmd->add_option("--delta", th_delta)->required();
  th_cmd->add_option("--alpha", th_alpha)->required();
  th_cmd->add_option("--xsinf", th_xs, "||x0_S||_inf")->required();
  th_cmd->add_option("--xzinf", th_xz, "||x0_Z||_inf")->required();
  th_cmd->add_option("--xinf", th_xinf, "||x0||_inf (default max of the two)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (phase_cmd->parsed()) {
      run_phase_cmd(phase);
    } else if (conv_cmd->parsed()) {
      run_convergence_cmd(conv);
    } else if (solve_cmd->parsed()) {
      run_solve_cmd(solve);
    } else if (rip_cmd->parsed()) {
      std::cout << rip_json(certificates::rip_constant(io::read_matrix_csv(rip_matrix), rip_k, rip_cap)).dump(2)
                << '\n';
    } else if (nu_cmd->parsed()) {
      const auto a = io::read_matrix_csv(nu_matrix);
      const auto x = io::read_vector_csv(nu_xstar);
      std::cout << nu_json(certificates::nu_constant(a, x, nu_alpha)).dump(2) << '\n';
    } else if (th_cmd->parsed()) {
      const double xinf = th_xinf.value_or(std::max(th_xs, th_xz));
      std::cout << thresholds_json(certificates::recovery_thresholds(th_delta, th_alpha, th_xs, th_xz, xinf)).dump(2)
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
