#include "mrfmle/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrfmle/harness.hpp"
#include "mrfmle/oracle.hpp"

namespace fs = std::filesystem;

namespace mrfmle {

namespace {

// Plain numeric CSV -> matrix. A single leading non-numeric row is treated as
// a header and skipped.
Mat read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool may_be_header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        double v = std::stod(cell, &pos);
        row.push_back(v);
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (may_be_header) {
        may_be_header = false;
        continue;
      }
      throw std::invalid_argument("non-numeric row in '" + path + "'");
    }
    may_be_header = false;
    if (!rows.empty() && rows.front().size() != row.size())
      throw std::invalid_argument("ragged rows in '" + path + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("'" + path + "' holds no data rows");
  Mat out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j)
      out(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return out;
}

// Header-keyed CSV -> named columns (used by `select --stats`).
std::map<std::string, std::vector<double>> read_columns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::map<std::string, std::vector<double>> cols;
  for (const std::string& n : names) cols[n] = {};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t idx = 0;
    while (std::getline(ss, cell, ',')) {
      if (idx >= names.size()) throw std::invalid_argument("ragged rows in '" + path + "'");
      cols[names[idx]].push_back(std::stod(cell));
      ++idx;
    }
    if (idx != names.size()) throw std::invalid_argument("ragged rows in '" + path + "'");
  }
  return cols;
}

struct Dataset {
  FeatureMap fm;
  ObservedSample obs;
  ReferenceChain ref;
};

// obs CSV: n x p observed feature rows. ref CSV: m x (p+1), column 0 the exact
// log h of each draw, columns 1..p its features.
Dataset load_dataset(const std::string& obs_path, const std::string& ref_path) {
  Dataset d;
  d.obs.features = read_matrix_csv(obs_path);
  d.obs.refresh_means();
  Mat refm = read_matrix_csv(ref_path);
  if (refm.cols() != d.obs.features.cols() + 1)
    throw std::invalid_argument("reference CSV must have one log_h column plus the feature "
                                "columns of the observed CSV");
  d.ref.kind = ReferenceKind::MarkovKernel;  // user-supplied draws
  d.ref.log_h = refm.col(0);
  d.ref.features = refm.rightCols(refm.cols() - 1);
  d.fm.p = static_cast<int>(d.obs.features.cols());
  d.fm.sup_bound = std::max(d.obs.features.cwiseAbs().maxCoeff(),
                            d.ref.features.cwiseAbs().maxCoeff());
  d.fm.eval_into = [](const State&, Vec&) {
    throw std::runtime_error("file-backed dataset: features are precomputed");
  };
  return d;
}

struct LambdaFlags {
  double lambda1 = -1.0;
  double lambda2 = -1.0;
  double lambda_prime = -1.0;
  int folds = 5;
  double tol = 1e-8;
  int max_iter = 5000;

  bool fixed() const { return lambda1 >= 0.0; }

  InferencePipelineConfig pipeline() const {
    InferencePipelineConfig p;
    p.solver.tol = tol;
    p.solver.max_iter = max_iter;
    p.cv_folds = folds;
    if (fixed()) {
      p.lambda_rule = LambdaRule::Fixed;
      p.solver.lambda1 = lambda1;
      p.solver.lambda2 = lambda2 >= 0.0 ? lambda2 : 0.1 * lambda1;
      p.solver.lambda_prime = lambda_prime >= 0.0 ? lambda_prime : lambda1;
    }
    return p;
  }
};

void add_lambda_flags(CLI::App* cmd, LambdaFlags& lf) {
  cmd->add_option("--lambda1", lf.lambda1, "l1 level (omit to cross-validate)");
  cmd->add_option("--lambda2", lf.lambda2, "ridge level (default 0.1*lambda1)");
  cmd->add_option("--lambda-prime", lf.lambda_prime,
                  "l1 level of the nuisance projection (default lambda1)");
  cmd->add_option("--folds", lf.folds, "cross-validation folds")->default_val(5);
  cmd->add_option("--tol", lf.tol, "solver tolerance")->default_val(1e-8);
  cmd->add_option("--max-iter", lf.max_iter, "solver iteration cap")->default_val(5000);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

int run_fit(const std::string& obs_path, const std::string& ref_path, const LambdaFlags& lf,
            RngSeed seed, const std::string& output_dir) {
  Dataset d = load_dataset(obs_path, ref_path);
  PenaltyConfig pen = choose_penalty(d.fm, d.obs, d.ref, lf.pipeline(), seed);
  FitResult fit = solve(d.fm, d.obs, d.ref, pen, Vec::Zero(d.fm.p));

  fs::create_directories(output_dir);
  {
    auto out = open_out(fs::path(output_dir) / "fit.csv");
    out << "index,theta_hat\n";
    for (int j = 0; j < d.fm.p; ++j) out << j << ',' << format_double(fit.theta_hat[j]) << '\n';
  }
  {
    auto out = open_out(fs::path(output_dir) / "fit_summary.csv");
    out << "lambda1,lambda2,lambda_prime,objective,iterations,kkt_residual,converged,"
           "support_size,ess\n";
    out << format_double(pen.lambda1) << ',' << format_double(pen.lambda2) << ','
        << format_double(pen.lambda_prime) << ',' << format_double(fit.objective) << ','
        << fit.iterations << ',' << format_double(fit.kkt_residual) << ','
        << (fit.converged ? 1 : 0) << ',' << fit.support_size << ','
        << format_double(fit.ess) << '\n';
  }
  std::printf("fit: objective=%s iterations=%d kkt=%s converged=%d support=%d ess=%s\n",
              format_double(fit.objective).c_str(), fit.iterations,
              format_double(fit.kkt_residual).c_str(), fit.converged ? 1 : 0,
              fit.support_size, format_double(fit.ess).c_str());
  return 0;
}

int run_infer(const std::string& obs_path, const std::string& ref_path, const LambdaFlags& lf,
              std::vector<int> targets, double eta, RngSeed seed,
              const std::string& output_dir) {
  Dataset d = load_dataset(obs_path, ref_path);
  InferencePipelineConfig pipe = lf.pipeline();
  pipe.eta = eta;
  if (targets.empty()) {
    targets.resize(static_cast<size_t>(d.fm.p));
    for (int j = 0; j < d.fm.p; ++j) targets[static_cast<size_t>(j)] = j;
  }
  PipelineResult pr = fit_and_infer_all(d.fm, d.obs, d.ref, pipe, seed, targets);

  fs::create_directories(output_dir);
  auto out = open_out(fs::path(output_dir) / "infer.csv");
  out << "index,alpha_tilde,h_hat,s_stat,p_value,ci_lo,ci_hi\n";
  for (const InferenceResult& r : pr.coords) {
    out << r.target_index << ',' << format_double(r.alpha_tilde) << ','
        << format_double(r.h_hat) << ',' << format_double(r.s_stat) << ','
        << format_double(r.p_value) << ',' << format_double(r.ci_lo) << ','
        << format_double(r.ci_hi) << '\n';
  }
  std::printf("infer: %zu coordinates written\n", pr.coords.size());
  return 0;
}

int run_select(const std::string& method, const std::string& stats_path, double q,
               const std::string& output_dir) {
  auto cols = read_columns_csv(stats_path);
  auto col = [&](const char* name) -> Vec {
    auto it = cols.find(name);
    if (it == cols.end())
      throw std::invalid_argument("'" + stats_path + "' lacks required column '" + name + "'");
    return Eigen::Map<const Vec>(it->second.data(), static_cast<int>(it->second.size()));
  };

  SelectionResult sel;
  Vec statistic;
  if (method == "ebh") {
    statistic = col("e_value");
    sel = ebh_select_values(statistic, q);
  } else if (method == "single-split") {
    Vec t1 = col("t1"), t2 = col("t2");
    MirrorConfig mc;
    mc.q = q;
    sel = mirror_select(t1, t2, mc);
    statistic = sel.mirror.m_values;
  } else if (method == "multi-split") {
    statistic = col("inclusion_rate");
    sel = select_from_inclusion_rates(statistic, q);
  } else {
    throw std::invalid_argument("unknown method '" + method +
                                "' (expected single-split|multi-split|ebh)");
  }

  std::vector<bool> chosen(static_cast<size_t>(statistic.size()), false);
  for (int j : sel.selected) chosen[static_cast<size_t>(j)] = true;

  fs::create_directories(output_dir);
  auto out = open_out(fs::path(output_dir) / "selection.csv");
  out << "index,statistic,selected,method,q\n";
  for (int j = 0; j < statistic.size(); ++j) {
    out << j << ',' << format_double(statistic[j]) << ',' << (chosen[static_cast<size_t>(j)] ? 1 : 0)
        << ',' << method << ',' << format_double(q) << '\n';
  }
  std::printf("select: %zu of %d coordinates selected\n", sel.selected.size(),
              static_cast<int>(statistic.size()));
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Penalized maximum likelihood, inference and FDR-controlled selection for "
               "exponential-family Markov random fields"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 20240801;
  int threads = 0;
  std::string output_dir = ".";
  app.add_option("--config", config_path, "experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "base RNG seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads");
  auto* outdir_opt = app.add_option("--output-dir", output_dir, "output directory");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "penalized fit of one dataset");
  // Global flags may be given after the subcommand (`simulate --config ...`).
  fit_cmd->fallthrough(true);
  std::string obs_path, ref_path;
  LambdaFlags fit_lf;
  fit_cmd->add_option("--obs", obs_path, "observed feature CSV (n x p)")->required();
  fit_cmd->add_option("--ref", ref_path, "reference CSV (log_h + m x p features)")->required();
  add_lambda_flags(fit_cmd, fit_lf);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "per-coordinate one-step inference");
  infer_cmd->fallthrough(true);
  std::string inf_obs, inf_ref;
  LambdaFlags inf_lf;
  std::vector<int> targets;
  double eta = 0.05;
  infer_cmd->add_option("--obs", inf_obs, "observed feature CSV (n x p)")->required();
  infer_cmd->add_option("--ref", inf_ref, "reference CSV (log_h + m x p features)")->required();
  infer_cmd->add_option("--targets", targets, "coordinate indices (default: all)")
      ->delimiter(',');
  infer_cmd->add_option("--eta", eta, "CI miscoverage level")->default_val(0.05);
  add_lambda_flags(infer_cmd, inf_lf);

  // select
  auto* select_cmd = app.add_subcommand("select", "FDR-controlled selection from statistics");
  select_cmd->fallthrough(true);
  std::string method, stats_path;
  double q = 0.05;
  select_cmd->add_option("--method", method, "single-split|multi-split|ebh")->required();
  select_cmd->add_option("--stats", stats_path, "statistics CSV")->required();
  select_cmd->add_option("--q", q, "target FDR level")->default_val(0.05);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run a config-driven experiment");
  sim_cmd->fallthrough(true);

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "run the built-in oracle self-checks");
  verify_cmd->fallthrough(true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit_cmd->parsed()) {
      return run_fit(obs_path, ref_path, fit_lf, RngSeed{seed, 0}, output_dir);
    }
    if (infer_cmd->parsed()) {
      return run_infer(inf_obs, inf_ref, inf_lf, targets, eta, RngSeed{seed, 0}, output_dir);
    }
    if (select_cmd->parsed()) {
      return run_select(method, stats_path, q, output_dir);
    }
    if (sim_cmd->parsed()) {
      if (config_path.empty())
        throw std::invalid_argument("simulate requires --config <file.json>");
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (seed_opt->count() > 0) cfg.seed.seed = seed;
      if (threads_opt->count() > 0) cfg.threads = threads;
      if (outdir_opt->count() > 0) cfg.output_dir = output_dir;
      cfg.validate();
      ExperimentTable table = run_experiment(cfg);
      std::printf("simulate: %zu records\n", table.records.size());
      for (const std::string& f : table.files_written) std::printf("wrote %s\n", f.c_str());
      return 0;
    }
    if (verify_cmd->parsed()) {
      int failed = oracle::run_verification_suite(true);
      if (failed == 0) {
        std::printf("verify: all checks passed\n");
        return 0;
      }
      std::fprintf(stderr, "verify: %d check(s) failed\n", failed);
      return 2;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace mrfmle
