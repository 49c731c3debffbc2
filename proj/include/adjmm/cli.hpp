#pragma once

// Command-line front end: `estimate`, `adjoint-check` and `bench`.
// Exit codes: 0 success (including a detected adjoint pair), 1 numerical
// failure, 2 configuration error, 3 dimension mismatch.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adjmm/diagnostics.hpp"
#include "adjmm/estimate.hpp"
#include "adjmm/estimator_one.hpp"
#include "adjmm/estimator_two.hpp"
#include "adjmm/io.hpp"
#include "adjmm/operator.hpp"
#include "adjmm/oracle.hpp"
#include "adjmm/rng.hpp"
#include "adjmm/tomo.hpp"

namespace adjmm::cli {

enum ExitCode : int { kOk = 0, kNumerical = 1, kConfig = 2, kDimension = 3 };

enum class Algorithm { one_step, two_step };
enum class DiagMode { black_box, dense_test };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::one_step ? "one-step" : "two-step"; }

/// Stream ids for RngState::substream.
inline constexpr std::uint64_t kMatrixStream = 1;
inline constexpr std::uint64_t kEstimatorStream = 2;
inline constexpr std::uint64_t kCheckStream = 3;

struct RunConfig {
  Algorithm algorithm = Algorithm::two_step;
  std::size_t max_iters = 5000;
  double eps = 1e-8;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  double null_tol = 1e-12;
  std::optional<std::string> trace_path;
  DiagMode diag_mode = DiagMode::black_box;

  void validate() const {
    if (!(eps > 0.0)) throw ConfigError("--eps must be > 0");
    if (max_iters < 1) throw ConfigError("--max-iters must be >= 1");
    if (patience < 1) throw ConfigError("--patience must be >= 1");
    if (repeats < 1) throw ConfigError("--repeats must be >= 1");
    if (!(null_tol >= 0.0)) throw ConfigError("--null-tol must be >= 0");
  }

  EstimatorConfig estimator() const {
    EstimatorConfig c;
    c.max_iters = max_iters;
    c.eps = eps;
    c.patience = patience;
    c.null_tol = null_tol;
    return c;
  }
};

/// Seed of repeat i.
inline std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) { return seed ^ repeat; }

inline DenseMatrix gaussian_matrix(std::size_t m, std::size_t d, RngState& rng) {
  DenseMatrix M(m, d);
  for (double& x : M.entries()) x = rng.normal();
  return M;
}

/// Independent standard Gaussian A and V (both m x d) for a seed; A is drawn first.
inline std::pair<DenseMatrix, DenseMatrix> gaussian_pair(std::size_t m, std::size_t d, std::uint64_t seed) {
  RngState rng = RngState(seed).substream(kMatrixStream);
  DenseMatrix A = gaussian_matrix(m, d, rng);
  DenseMatrix V = gaussian_matrix(m, d, rng);
  return {std::move(A), std::move(V)};
}

inline RngState estimator_rng(std::uint64_t seed) { return RngState(seed).substream(kEstimatorStream); }

inline EstimateReport run_estimator(Algorithm algo, BlackBoxPair& pair, const EstimatorConfig& cfg, RngState& rng) {
  return algo == Algorithm::one_step ? run_one(pair, cfg, rng) : run_two(pair, cfg, rng);
}

struct SourceOptions {
  std::string a_path;
  std::string v_path;
  bool v_zero = false;
  std::vector<std::size_t> gaussian;
  std::vector<std::size_t> tomo;
  std::string backprojector = "exact";
  double bin_width = 1.0;
};

/// A resolved operator pair; the dense difference is available when both sides are materializable.
struct OperatorSource {
  ForwardOracle forward;
  AdjointOracle adjoint;
  std::optional<DenseMatrix> dense_a;
  std::optional<DenseMatrix> dense_v;

  BlackBoxPair pair() const { return {forward, adjoint}; }

  DenseMatrix dense_difference() const {
    const DenseMatrix A = dense_a ? *dense_a : materialize(forward);
    const DenseMatrix V = dense_v ? *dense_v : materialize(adjoint);
    return A - V;
  }
};

inline OperatorSource resolve_source(const SourceOptions& o, std::uint64_t seed) {
  const int kinds = int(!o.a_path.empty()) + int(!o.gaussian.empty()) + int(!o.tomo.empty());
  if (kinds != 1) throw ConfigError("choose exactly one operator source: --a, --gaussian or --tomo");
  OperatorSource src;
  if (!o.gaussian.empty()) {
    if (o.gaussian.size() != 2) throw ConfigError("--gaussian takes M D");
    auto [A, V] = gaussian_pair(o.gaussian[0], o.gaussian[1], seed);
    if (o.v_zero) V = DenseMatrix(A.rows(), A.cols());
    src.dense_a = std::move(A);
    src.dense_v = std::move(V);
  } else if (!o.a_path.empty()) {
    DenseMatrix A = io::read_matrix_csv(o.a_path);
    DenseMatrix V;
    if (o.v_zero) {
      V = DenseMatrix(A.rows(), A.cols());
    } else {
      if (o.v_path.empty()) throw ConfigError("--a needs --v FILE or --v-zero");
      V = io::read_matrix_csv(o.v_path);
    }
    if (A.rows() != V.rows() || A.cols() != V.cols()) {
      std::ostringstream os;
      os << "A is " << A.rows() << "x" << A.cols() << " but V is " << V.rows() << "x" << V.cols();
      throw DimensionError(os.str());
    }
    src.dense_a = std::move(A);
    src.dense_v = std::move(V);
  } else {
    if (o.tomo.size() != 3) throw ConfigError("--tomo takes N ANGLES BINS");
    tomo::ProjectorSet set(tomo::ProjectorGeometry::uniform(o.tomo[0], o.tomo[1], o.tomo[2], o.bin_width));
    src.forward = set.forward();
    if (o.v_zero)
      src.adjoint = zero_adjoint_oracle(src.forward.rows, src.forward.cols);
    else if (o.backprojector == "exact")
      src.adjoint = set.exact_backprojector();
    else if (o.backprojector == "mismatched")
      src.adjoint = set.mismatched_backprojector();
    else
      throw ConfigError("--backprojector must be 'exact' or 'mismatched'");
    return src;
  }
  src.forward = dense_forward_oracle(*src.dense_a);
  src.adjoint = dense_adjoint_oracle(*src.dense_v);
  return src;
}

inline void add_source_options(CLI::App& app, SourceOptions& o) {
  app.add_option("--a", o.a_path, "CSV file with the forward matrix A (first line 'm,d')");
  app.add_option("--v", o.v_path, "CSV file with V (m x d); its transpose is the adjoint oracle");
  app.add_flag("--v-zero", o.v_zero, "use V = 0");
  app.add_option("--gaussian", o.gaussian, "seeded Gaussian A and V of size M x D")->expected(2);
  app.add_option("--tomo", o.tomo, "parallel-beam projector: N ANGLES BINS")->expected(3);
  app.add_option("--backprojector", o.backprojector, "tomo adjoint: exact | mismatched");
  app.add_option("--bin-width", o.bin_width, "tomo detector bin width in pixels");
}

inline void add_run_options(CLI::App& app, RunConfig& c, std::string& algo, std::string& diag) {
  app.add_option("--algorithm", algo, "one-step | two-step")->check(CLI::IsMember({"one-step", "two-step"}));
  app.add_option("--max-iters", c.max_iters, "iteration limit");
  app.add_option("--eps", c.eps, "stopping tolerance");
  app.add_option("--patience", c.patience, "consecutive sub-eps iterations before stopping");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--repeats", c.repeats, "independent runs (seed xor repeat index)");
  app.add_option("--null-tol", c.null_tol, "relative threshold for the zero-objective test at initialization");
  app.add_option("--trace", c.trace_path, "write a per-iteration CSV trace");
  app.add_option("--diag", diag, "black-box | dense-test")->check(CLI::IsMember({"black-box", "dense-test"}));
}

inline void finalize_run_options(RunConfig& c, const std::string& algo, const std::string& diag) {
  c.algorithm = algo == "one-step" ? Algorithm::one_step : Algorithm::two_step;
  c.diag_mode = diag == "dense-test" ? DiagMode::dense_test : DiagMode::black_box;
  c.validate();
}

inline std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ADJMM_THREADS")) {
    try {
      n = std::max<std::size_t>(1, std::stoul(env));
    } catch (const std::exception&) {
      throw ConfigError("ADJMM_THREADS must be a positive integer");
    }
  }
  return std::min(n, std::max<std::size_t>(1, jobs));
}

/// Runs job(i) for i in [0, n) on a small thread pool; results are written by index.
template <typename Job>
void parallel_for(std::size_t n, Job&& job) {
  const std::size_t workers = worker_count(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string trace_path_for(const std::string& base, std::size_t repeat, std::size_t repeats) {
  return repeats == 1 ? base : base + ".r" + std::to_string(repeat);
}

inline void write_trace_file(const std::string& path, const EstimateReport& rep) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write trace file '" + path + "'");
  io::write_trace_csv(f, rep.trace);
}

inline nlohmann::ordered_json report_json(const EstimateReport& r, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["estimate"] = r.estimate;
  j["iterations"] = r.iterations;
  j["stop_reason"] = std::string(to_string(r.stop_reason));
  j["n_forward"] = r.n_forward;
  j["n_adjoint"] = r.n_adjoint;
  j["seed"] = seed;
  return j;
}

inline int cmd_estimate(const SourceOptions& so, const RunConfig& cfg, std::ostream& out) {
  const OperatorSource src = resolve_source(so, cfg.seed);
  EstimatorConfig ec = cfg.estimator();
  if (cfg.diag_mode == DiagMode::dense_test) ec.observer = residual_observer(src.dense_difference());

  std::vector<EstimateReport> reports(cfg.repeats);
  parallel_for(cfg.repeats, [&](std::size_t i) {
    BlackBoxPair pair = src.pair();
    RngState rng = estimator_rng(repeat_seed(cfg.seed, i));
    reports[i] = run_estimator(cfg.algorithm, pair, ec, rng);
  });
  for (std::size_t i = 0; i < cfg.repeats; ++i) {
    if (cfg.trace_path) write_trace_file(trace_path_for(*cfg.trace_path, i, cfg.repeats), reports[i]);
    out << report_json(reports[i], repeat_seed(cfg.seed, i)).dump() << '\n';
  }
  return kOk;
}

struct AdjointCheckOptions {
  double threshold = 1e-7;
  std::size_t dot_trials = 20;
};

inline int cmd_adjoint_check(const SourceOptions& so, const RunConfig& cfg, const AdjointCheckOptions& opt,
                             std::ostream& out) {
  const OperatorSource src = resolve_source(so, cfg.seed);
  EstimatorConfig ec = cfg.estimator();
  ec.stop_on_null = false;

  BlackBoxPair pair = src.pair();
  RngState rng = estimator_rng(cfg.seed);
  const EstimateReport diff = run_estimator(Algorithm::two_step, pair, ec, rng);

  // ||A|| from the forward oracle alone: the same estimator on the pair (A, 0).
  BlackBoxPair scale_pair(src.forward, zero_adjoint_oracle(src.forward.rows, src.forward.cols));
  RngState scale_rng = RngState(cfg.seed).substream(kCheckStream);
  const EstimateReport scale = run_estimator(Algorithm::two_step, scale_pair, ec, scale_rng);

  RngState dot_rng = RngState(cfg.seed).substream(kCheckStream + 1);
  const double defect = adjointness_test(src.forward, src.adjoint, opt.dot_trials, dot_rng);

  const double relative = scale.estimate > 0.0 ? diff.estimate / scale.estimate : diff.estimate;
  const bool adjoint = diff.estimate <= opt.threshold * scale.estimate;

  if (cfg.trace_path) write_trace_file(*cfg.trace_path, diff);
  nlohmann::ordered_json j = report_json(diff, cfg.seed);
  j["scale"] = scale.estimate;
  j["relative"] = relative;
  j["dot_defect"] = defect;
  j["verdict"] = adjoint ? "ADJOINT" : "MISMATCH";
  out << j.dump() << '\n';
  return kOk;
}

struct BenchOptions {
  std::vector<std::string> sizes;
};

inline std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t p1 = 0, p2 = 0;
    const auto m = std::stoul(s.substr(0, x), &p1);
    const auto d = std::stoul(s.substr(x + 1), &p2);
    if (p1 != x || p2 != s.size() - x - 1 || m < 2 || d < 2) throw std::invalid_argument(s);
    return {m, d};
  } catch (const std::exception&) {
    throw ConfigError("bad size '" + s + "', expected MxD with M, D >= 2");
  }
}

/// Long-format CSV: size,algo,repeat,iter,rel_error with rel_error = (sigma_1 - objective)/sigma_1.
inline int cmd_bench(const SourceOptions& so, const RunConfig& cfg, const BenchOptions& bo, std::ostream& out) {
  std::vector<std::string> labels;
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  const bool from_source = !so.a_path.empty() || !so.tomo.empty();
  if (from_source) {
    if (!bo.sizes.empty()) throw ConfigError("--sizes cannot be combined with an explicit operator source");
    labels.push_back("custom");
    dims.emplace_back(0, 0);
  } else {
    if (bo.sizes.empty()) throw ConfigError("bench needs --sizes or an operator source");
    for (const auto& s : bo.sizes) {
      dims.push_back(parse_size(s));
      labels.push_back(s);
    }
  }
  std::optional<OperatorSource> fixed;
  std::optional<double> fixed_sigma;
  if (from_source) {
    fixed = resolve_source(so, cfg.seed);
    fixed_sigma = jacobi_svd(fixed->dense_difference()).largest();
  }

  const std::size_t n_jobs = dims.size() * cfg.repeats;
  std::vector<std::array<std::string, 2>> chunks(n_jobs);
  const EstimatorConfig ec = cfg.estimator();
  parallel_for(n_jobs, [&](std::size_t job) {
    const std::size_t si = job / cfg.repeats, rep = job % cfg.repeats;
    const std::uint64_t seed = repeat_seed(cfg.seed, rep);
    OperatorSource src;
    double sigma = 0.0;
    if (fixed) {
      src = *fixed;
      sigma = *fixed_sigma;
    } else {
      SourceOptions g = so;
      g.gaussian = {dims[si].first, dims[si].second};
      src = resolve_source(g, seed);
      sigma = jacobi_svd(*src.dense_a - *src.dense_v).largest();
    }
    for (Algorithm algo : {Algorithm::one_step, Algorithm::two_step}) {
      std::ostringstream os;
      BlackBoxPair pair = src.pair();
      RngState rng = estimator_rng(seed);
      const EstimateReport rep_out = run_estimator(algo, pair, ec, rng);
      for (const auto& row : rep_out.trace) {
        const double rel = sigma > 0.0 ? (sigma - row.objective) / sigma : 0.0;
        os << labels[si] << ',' << to_string(algo) << ',' << rep << ',' << row.iter << ','
           << io::format_double(rel) << '\n';
      }
      chunks[job][algo == Algorithm::one_step ? 0 : 1] = os.str();
    }
  });

  // rows ordered by size, then algorithm, then repeat, then iteration
  out << "size,algo,repeat,iter,rel_error\n";
  for (std::size_t si = 0; si < dims.size(); ++si) {
    for (std::size_t algo = 0; algo < 2; ++algo)
      for (std::size_t rep = 0; rep < cfg.repeats; ++rep) out << chunks[si * cfg.repeats + rep][algo];
  }
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Estimate ||A - V|| from a forward oracle for A and an adjoint oracle for V", "adjmm"};
  app.require_subcommand(1);

  SourceOptions src;
  RunConfig cfg;
  std::string algo = "two-step", diag = "black-box";
  AdjointCheckOptions check_opts;
  BenchOptions bench_opts;
  std::string bench_out;

  auto* estimate = app.add_subcommand("estimate", "estimate ||A - V||");
  add_source_options(*estimate, src);
  add_run_options(*estimate, cfg, algo, diag);

  auto* check = app.add_subcommand("adjoint-check", "decide whether V* is the adjoint of A");
  add_source_options(*check, src);
  add_run_options(*check, cfg, algo, diag);
  check->add_option("--threshold", check_opts.threshold, "ADJOINT if estimate <= threshold * ||A||");
  check->add_option("--dot-trials", check_opts.dot_trials, "random pairs for the dot-product test");

  auto* bench = app.add_subcommand("bench", "compare one-step and two-step on Gaussian matrices");
  add_source_options(*bench, src);
  add_run_options(*bench, cfg, algo, diag);
  bench->add_option("--sizes", bench_opts.sizes, "comma-separated MxD list")->delimiter(',');
  bench->add_option("--out", bench_out, "CSV output path (default stdout)");

  std::vector<const char*> argv{"adjmm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (check->parsed()) {
      // a fixed iteration budget: the absolute eps says nothing about an operator of unknown scale
      if (!check->count("--max-iters")) cfg.max_iters = 1000;
      if (!check->count("--eps")) cfg.eps = std::numeric_limits<double>::denorm_min();
      finalize_run_options(cfg, algo, diag);
      return cmd_adjoint_check(src, cfg, check_opts, out);
    }
    finalize_run_options(cfg, algo, diag);
    if (estimate->parsed()) return cmd_estimate(src, cfg, out);
    if (bench_out.empty()) return cmd_bench(src, cfg, bench_opts, out);
    std::ofstream f(bench_out, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + bench_out + "'");
    return cmd_bench(src, cfg, bench_opts, f);
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kDimension;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const io::FormatError& e) {
    err << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace adjmm::cli
