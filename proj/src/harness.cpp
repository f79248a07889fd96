#include "lbreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "lbreg/certificates.hpp"
#include "lbreg/error.hpp"
#include "lbreg/rng.hpp"

namespace lbreg::harness {

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

const char* to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::Flat:
      return "flat";
    case SignalKind::Gaussian:
      return "gaussian";
    case SignalKind::PowerLaw:
      return "powerlaw";
  }
  return "unknown";
}

SignalKind parse_signal_kind(const std::string& name) {
  if (name == "flat" || name == "bernoulli") return SignalKind::Flat;
  if (name == "gaussian") return SignalKind::Gaussian;
  if (name == "powerlaw" || name == "power_law") return SignalKind::PowerLaw;
  throw InvalidArgument("unknown signal kind '" + name + "' (expected flat, gaussian or powerlaw)");
}

Vector gen_signal(const SignalSpec& spec) {
  if (spec.n == 0) throw InvalidArgument("gen_signal: n must be positive");
  if (spec.k == 0 || spec.k > spec.n) throw InvalidArgument("gen_signal: need 1 <= k <= n");
  SplitMix64 rng(spec.seed);

  std::vector<std::size_t> idx(spec.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < spec.k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(spec.n - i));
    std::swap(idx[i], idx[j]);
  }

  Vector x(spec.n, 0.0);
  for (std::size_t i = 0; i < spec.k; ++i) {
    double v = 0.0;
    switch (spec.kind) {
      case SignalKind::Flat:
        v = rng.coin() ? 1.0 : -1.0;
        break;
      case SignalKind::Gaussian:
        v = rng.gaussian();
        break;
      case SignalKind::PowerLaw: {
        const double rank = static_cast<double>(i + 1);
        v = (rng.coin() ? 1.0 : -1.0) / (rank * rank);
        break;
      }
    }
    x[idx[i]] = v;
  }
  const double top = linalg::norm_inf(x);
  if (top == 0.0) throw Error("gen_signal: generated an all-zero signal");
  if (top != 1.0) {
    for (double& v : x) v /= top;
  }
  return x;
}

Matrix gen_gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw InvalidArgument("gen_gaussian_matrix: dimensions must be positive");
  SplitMix64 rng(seed);
  Matrix a(m, n);
  for (double& v : a.values()) v = rng.gaussian();
  return a;
}

double relative_error(ConstSpan x_star, ConstSpan x_true) {
  if (x_star.size() != x_true.size()) throw InvalidArgument("relative_error: length mismatch");
  const double denom = linalg::norm2(x_true);
  if (denom == 0.0) throw InvalidArgument("relative_error: x_true must be nonzero");
  return linalg::norm2(linalg::subtract(x_star, x_true)) / denom;
}

// ---- configuration --------------------------------------------------------

solvers::SolverOptions ExperimentConfig::default_solver() {
  solvers::SolverOptions o;
  o.variant = solvers::Variant::BB;
  o.tol = 1e-6;
  o.max_iter = 5000;
  o.keep_iterates = false;
  return o;
}

ExperimentConfig ExperimentConfig::desk_scale() {
  ExperimentConfig c;
  c.n = 100;
  for (std::size_t m = 10; m <= 60; m += 5) c.m_values.push_back(m);
  for (std::size_t k = 1; k <= 20; ++k) c.k_values.push_back(k);
  c.trials = 25;
  return c;
}

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig c;
  c.n = 400;
  for (std::size_t m = 40; m <= 200; ++m) c.m_values.push_back(m);
  for (std::size_t k = 1; k <= 80; ++k) c.k_values.push_back(k);
  c.trials = 100;
  return c;
}

void ExperimentConfig::validate() const {
  if (n == 0) throw InvalidArgument("config: n must be positive");
  if (m_values.empty()) throw InvalidArgument("config: m range is empty");
  if (k_values.empty()) throw InvalidArgument("config: k range is empty");
  for (std::size_t m : m_values) {
    if (m == 0) throw InvalidArgument("config: m must be positive");
  }
  for (std::size_t k : k_values) {
    if (k == 0 || k > n) throw InvalidArgument("config: every k must satisfy 1 <= k <= n");
  }
  if (trials < 1) throw InvalidArgument("config: trials must be at least 1");
  if (alphas.empty()) throw InvalidArgument("config: alphas must be nonempty");
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("config: alphas must be positive");
  }
  for (double e : error_levels) {
    if (!(e > 0.0)) throw InvalidArgument("config: error levels must be positive");
  }
  if (!(success_level > 0.0)) throw InvalidArgument("config: success_level must be positive");
  solver.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

class ConfigLine {
 public:
  ConfigLine(std::string key, std::string value, int line) : key_(std::move(key)), value_(std::move(value)), line_(line) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw InvalidArgument("config line " + std::to_string(line_) + " (" + key_ + "): " + why);
  }

  double real(const std::string& text) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (trim(text.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    fail("'" + text + "' is not a number");
  }

  std::uint64_t integer(const std::string& text) const {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(text, &used);
      if (trim(text.substr(used)).empty() && text.find('-') == std::string::npos) return v;
    } catch (const std::exception&) {
    }
    fail("'" + text + "' is not a nonnegative integer");
  }

  double real() const { return real(value_); }
  std::uint64_t integer() const { return integer(value_); }
  std::string text() const { return unquote(value_); }

  bool boolean() const {
    if (value_ == "true") return true;
    if (value_ == "false") return false;
    fail("expected true or false");
  }

  std::vector<double> reals() const {
    std::vector<double> out;
    for (const auto& item : items()) out.push_back(real(item));
    return out;
  }

  /// [a, b, c] or start:stop[:step], inclusive.
  std::vector<std::size_t> counts() const {
    if (value_.find(':') != std::string::npos && value_.front() != '[') {
      std::vector<std::string> parts;
      std::stringstream ss(value_);
      std::string p;
      while (std::getline(ss, p, ':')) parts.push_back(trim(p));
      if (parts.size() < 2 || parts.size() > 3) fail("ranges are written start:stop or start:stop:step");
      const std::uint64_t start = integer(parts[0]);
      const std::uint64_t stop = integer(parts[1]);
      const std::uint64_t step = parts.size() == 3 ? integer(parts[2]) : 1;
      if (step == 0 || stop < start) fail("empty or invalid range");
      std::vector<std::size_t> out;
      for (std::uint64_t v = start; v <= stop; v += step) out.push_back(static_cast<std::size_t>(v));
      return out;
    }
    std::vector<std::size_t> out;
    for (const auto& item : items()) out.push_back(static_cast<std::size_t>(integer(item)));
    return out;
  }

  const std::string& key() const { return key_; }

 private:
  std::vector<std::string> items() const {
    std::string body = value_;
    if (!body.empty() && body.front() == '[') {
      if (body.back() != ']') fail("unterminated list");
      body = body.substr(1, body.size() - 2);
    }
    std::vector<std::string> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) fail("empty list");
    return out;
  }

  std::string key_;
  std::string value_;
  int line_;
};

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c = ExperimentConfig::desk_scale();
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty() || s.front() == '[') continue;  // blank line or [section] header
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(line) + ": expected key = value");
    const ConfigLine kv(trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line);
    const std::string& key = kv.key();

    if (key == "n") c.n = kv.integer();
    else if (key == "m_range" || key == "m_values" || key == "m") c.m_values = kv.counts();
    else if (key == "k_range" || key == "k_values" || key == "k") c.k_values = kv.counts();
    else if (key == "trials") c.trials = kv.integer();
    else if (key == "alphas") c.alphas = kv.reals();
    else if (key == "kind" || key == "signal") c.kind = parse_signal_kind(kv.text());
    else if (key == "error_levels") c.error_levels = kv.reals();
    else if (key == "success_level") c.success_level = kv.real();
    else if (key == "master_seed" || key == "seed") c.master_seed = kv.integer();
    else if (key == "threads") c.threads = static_cast<unsigned>(kv.integer());
    else if (key == "smooth") c.smooth = kv.boolean();
    else if (key == "variant") c.solver.variant = solvers::parse_variant(kv.text());
    else if (key == "tol") c.solver.tol = kv.real();
    else if (key == "max_iter") c.solver.max_iter = static_cast<long>(kv.integer());
    else if (key == "h") c.solver.h = kv.real();
    else if (key == "h_min") c.solver.bb.h_min = kv.real();
    else if (key == "h_max") c.solver.bb.h_max = kv.real();
    else if (key == "eta") c.solver.bb.eta = kv.real();
    else if (key == "c_armijo") c.solver.bb.c_armijo = kv.real();
    else if (key == "backtrack") c.solver.bb.backtrack = kv.real();
    else kv.fail("unknown key");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path);
  return parse_config(in);
}

// ---- phase transition -----------------------------------------------------

std::uint64_t instance_seed(std::uint64_t master, std::size_t m, std::size_t k, std::size_t trial) {
  return derive_seed({master, m, k, trial});
}

const CellSummary& PhaseResult::cell(std::size_t m, std::size_t k, double alpha_multiple) const {
  for (const auto& c : cells) {
    if (c.m == m && c.k == k && c.alpha_multiple == alpha_multiple) return c;
  }
  throw InvalidArgument("PhaseResult: no cell for m=" + std::to_string(m) + ", k=" + std::to_string(k));
}

PhaseResult run_phase(const ExperimentConfig& config) {
  config.validate();
  const std::vector<std::size_t> ms = sorted_unique(config.m_values);
  const std::vector<std::size_t> ks = sorted_unique(config.k_values);
  const std::size_t na = config.alphas.size();
  const std::size_t nt = config.trials;
  const std::size_t tasks = ms.size() * ks.size() * nt;

  solvers::SolverOptions opts = config.solver;
  opts.keep_iterates = false;

  PhaseResult out;
  out.trials.resize(tasks * na);
  auto slot = [&](std::size_t mi, std::size_t ki, std::size_t ai, std::size_t t) {
    return ((mi * ks.size() + ki) * na + ai) * nt + t;
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= tasks) return;
      try {
        const std::size_t t = task % nt;
        const std::size_t ki = (task / nt) % ks.size();
        const std::size_t mi = task / (nt * ks.size());
        const std::uint64_t seed = instance_seed(config.master_seed, ms[mi], ks[ki], t);
        const Matrix a = gen_gaussian_matrix(ms[mi], config.n, derive_seed({seed, 0}));
        const Vector x0 = gen_signal({config.n, ks[ki], config.kind, derive_seed({seed, 1})});
        const Vector b = linalg::multiply(a, x0);
        const double xinf = linalg::norm_inf(x0);
        for (std::size_t ai = 0; ai < na; ++ai) {
          TrialResult& r = out.trials[slot(mi, ki, ai, t)];
          r.m = ms[mi];
          r.k = ks[ki];
          r.alpha_multiple = config.alphas[ai];
          r.alpha_index = ai;
          r.trial = t;
          const auto start = std::chrono::steady_clock::now();
          try {
            const models::Model model(models::SensingOperator::dense(a), b, config.alphas[ai] * xinf);
            const solvers::Trace trace = solvers::solve(model, opts);
            r.rel_error = relative_error(trace.x.values(), x0);
            r.iterations = trace.iterations;
            r.converged = trace.status == solvers::Status::Converged;
          } catch (const Error&) {
            r.rel_error = std::numeric_limits<double>::infinity();
          }
          r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(tasks);
      }
    }
  };

  unsigned threads = config.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, tasks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Cell summaries.
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      for (std::size_t ai = 0; ai < na; ++ai) {
        CellSummary c;
        c.m = ms[mi];
        c.k = ks[ki];
        c.alpha_multiple = config.alphas[ai];
        double sum = 0.0;
        std::size_t ok = 0;
        for (std::size_t t = 0; t < nt; ++t) {
          const double e = out.trials[slot(mi, ki, ai, t)].rel_error;
          sum += e;
          if (e <= config.success_level) ++ok;
        }
        const double trials = static_cast<double>(nt);
        c.mean_rel_error = sum / trials;
        c.success_rate = static_cast<double>(ok) / trials;
        c.std_error = std::sqrt(c.success_rate * (1.0 - c.success_rate) / trials);
        out.cells.push_back(c);
      }
    }
  }

  // Cutoff curves: smallest passing m per k, made monotone in k.
  for (double level : config.error_levels) {
    for (std::size_t ai = 0; ai < na; ++ai) {
      std::vector<std::optional<double>> curve(ks.size());
      std::optional<double> floor_m = 0.0;
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        std::optional<double> raw;
        for (std::size_t mi = 0; mi < ms.size() && !raw; ++mi) {
          const auto& c = out.cells[(mi * ks.size() + ki) * na + ai];
          if (c.mean_rel_error <= level) raw = static_cast<double>(ms[mi]);
        }
        if (!raw || !floor_m) {
          floor_m.reset();
        } else {
          floor_m = std::max(*floor_m, *raw);
        }
        curve[ki] = floor_m;
      }
      if (config.smooth) {
        std::vector<std::optional<double>> smoothed(curve.size());
        for (std::size_t ki = 0; ki < curve.size(); ++ki) {
          if (!curve[ki]) continue;
          double sum = *curve[ki];
          int count = 1;
          if (ki > 0 && curve[ki - 1]) sum += *curve[ki - 1], ++count;
          if (ki + 1 < curve.size() && curve[ki + 1]) sum += *curve[ki + 1], ++count;
          smoothed[ki] = sum / count;
        }
        curve = std::move(smoothed);
      }
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        out.curves.push_back({level, config.alphas[ai], ks[ki], curve[ki]});
      }
    }
  }
  return out;
}

void write_trials_csv(const PhaseResult& r, std::ostream& out) {
  out << "m,k,alpha_multiple,trial,rel_error,iterations,converged\n";
  for (const auto& t : r.trials) {
    out << t.m << ',' << t.k << ',' << num(t.alpha_multiple) << ',' << t.trial << ',' << num(t.rel_error) << ','
        << t.iterations << ',' << (t.converged ? 1 : 0) << '\n';
  }
}

void write_timing_csv(const PhaseResult& r, std::ostream& out) {
  out << "m,k,alpha_multiple,trial,wall_time\n";
  for (const auto& t : r.trials) {
    out << t.m << ',' << t.k << ',' << num(t.alpha_multiple) << ',' << t.trial << ',' << num(t.wall_time) << '\n';
  }
}

void write_curves_csv(const PhaseResult& r, std::ostream& out) {
  out << "level,alpha,k,m_star\n";
  for (const auto& c : r.curves) {
    out << num(c.level) << ',' << num(c.alpha_multiple) << ',' << c.k << ',' << (c.m_star ? num(*c.m_star) : "NA")
        << '\n';
  }
}

void write_cells_csv(const PhaseResult& r, std::ostream& out) {
  out << "m,k,alpha_multiple,mean_rel_error,success_rate,std_error\n";
  for (const auto& c : r.cells) {
    out << c.m << ',' << c.k << ',' << num(c.alpha_multiple) << ',' << num(c.mean_rel_error) << ','
        << num(c.success_rate) << ',' << num(c.std_error) << '\n';
  }
}

// ---- convergence demo -----------------------------------------------------

ConvergenceRun run_convergence(std::size_t m, std::size_t n, std::size_t k, SignalKind kind, double alpha_multiple,
                               std::uint64_t seed, const ConvergenceOptions& opts) {
  if (m == 0 || n == 0) throw InvalidArgument("run_convergence: sizes must be positive");
  if (!(alpha_multiple > 0.0)) throw InvalidArgument("run_convergence: alpha multiple must be positive");

  ConvergenceRun run;
  // A and the support depend only on the seed, so signals of different kinds
  // share the same sensing matrix.
  run.a = gen_gaussian_matrix(m, n, derive_seed({seed, 0}));
  run.x0 = gen_signal({n, k, kind, derive_seed({seed, 1})});
  run.b = linalg::multiply(run.a, run.x0);
  run.alpha = alpha_multiple * linalg::norm_inf(run.x0);
  const models::Model model(models::SensingOperator::dense(run.a), run.b, run.alpha);

  solvers::SolverOptions so;
  so.tol = opts.tol;
  so.max_iter = opts.max_iter;
  so.keep_iterates = true;
  for (solvers::Variant v : {solvers::Variant::Fixed, solvers::Variant::Kicking, solvers::Variant::BB}) {
    so.variant = v;
    run.traces.push_back(solvers::solve(model, so));
  }

  const certificates::PolishedSolution polished = certificates::polish_primal(model, run.traces.back().x.values());
  run.x_star = polished.x;
  const double scale = std::max(1.0, linalg::norm2(run.x_star));
  for (const auto& t : run.traces) {
    const double gap = linalg::norm2(linalg::subtract(t.x.values(), run.x_star));
    if (gap > opts.agreement * scale) {
      std::ostringstream os;
      os << "run_convergence: solver " << solvers::to_string(t.variant) << " ended " << gap
         << " away from the consensus solution";
      throw Error(os.str());
    }
  }

  const certificates::SolutionSet ss = certificates::solution_set(model, run.x_star);
  for (const auto& t : run.traces) {
    run.y_star.push_back(certificates::project_Ystar(ss, run.a, t.y).y_proj);
  }
  for (std::size_t s = 0; s < run.traces.size(); ++s) {
    const auto& t = run.traces[s];
    for (const auto& rec : t.records) {
      ConvRow row;
      row.k = rec.k;
      row.solver = solvers::to_string(t.variant);
      row.x_err = linalg::norm2(linalg::subtract(rec.x.values(), run.x_star));
      row.y_err = linalg::norm2(linalg::subtract(rec.y, run.y_star[s]));
      row.f = rec.f;
      row.grad_norm = rec.grad_norm;
      run.rows.push_back(std::move(row));
    }
  }
  return run;
}

void write_conv_csv(const ConvergenceRun& r, std::ostream& out) {
  out << "k,solver,x_err,y_err,f,grad_norm\n";
  for (const auto& row : r.rows) {
    out << row.k << ',' << row.solver << ',' << num(row.x_err) << ',' << num(row.y_err) << ',' << num(row.f) << ','
        << num(row.grad_norm) << '\n';
  }
}

}  // namespace lbreg::harness
