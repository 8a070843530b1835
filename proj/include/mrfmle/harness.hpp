#pragma once

#include <string>

#include "mrfmle/fdr.hpp"

namespace mrfmle {

// Simulation scenarios: which builtin feature family generates the field.
enum class Scenario { Phi1, Phi2, Phi3 };

Scenario scenario_from_name(const std::string& name);  // "phi1" | "phi2" | "phi3"
std::string scenario_name(Scenario s);
BuiltinFeature scenario_feature(Scenario s);

// One experiment = one config. Loaded from JSON; every field has a desk-scale
// default so a config file only states what it changes.
struct ExperimentConfig {
  std::string experiment = "l1_error";  // "l1_error" | "coverage" | "fdr"
  Scenario scenario = Scenario::Phi1;
  std::vector<int> n_grid{500};
  std::vector<int> p_grid{50};
  int m = 0;  // reference draws per replication; 0 means m = n
  int replications = 20;
  double q = 0.05;    // FDR target level
  double eta = 0.05;  // CI miscoverage level
  double sparsity_prob = 0.1;
  RngSeed seed{20240801, 0};

  LambdaRule lambda_rule = LambdaRule::CrossValidate;
  int cv_folds = 5;
  double rate_constant = 0.1;
  double lambda2_factor = 0.1;
  PenaltyConfig solver;  // tolerances; lambda fields honored when rule == Fixed

  MetropolisConfig sampler{0.5, 500, 10};  // desk-scale chain settings
  double box_lo = 0.0;
  double box_hi = 1.0;

  int n_splits = 1;  // > 1 additionally runs the multi-split procedure
  MirrorKind mirror_kind = MirrorKind::Product;
  int coverage_target = 0;  // coordinate whose CI the coverage experiment tracks

  int threads = 1;
  std::string output_dir = "out";
  bool write_plot = true;

  InferencePipelineConfig pipeline() const;
  void validate() const;  // throws std::invalid_argument with the offending key
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// One metric observation. records.csv is the append-only long-format log;
// rerunning a config reproduces it byte for byte.
struct ExperimentRecord {
  std::string scenario;
  int n = 0;
  int p = 0;
  int replication_id = 0;
  std::string metric_name;
  double metric_value = 0.0;
  std::uint64_t seed_used = 0;  // substream id that generated the replication
};

struct ExperimentTable {
  std::vector<ExperimentRecord> records;
  std::vector<std::string> files_written;
};

// theta*_j = U_j * 1(U'_j < prob) with independent uniforms, drawn j = 0..p-1
// (U before U' within each coordinate).
Vec generate_truth(int p, double prob, RngSeed seed);
std::vector<int> support_of(const Vec& theta);

// Average l1 estimation error over an (n, p) grid; writes records.csv and a
// grid CSV (rows n, columns p).
ExperimentTable run_l1_error_experiment(const ExperimentConfig& cfg);
// CI coverage / score-test rejection rate on one coordinate across n; writes
// records.csv, a curve CSV and (optionally) an SVG plot of the curve.
ExperimentTable run_coverage_experiment(const ExperimentConfig& cfg);
// FDP and power of the selection procedures against the known support;
// writes records.csv and per-method grid CSVs.
ExperimentTable run_fdr_experiment(const ExperimentConfig& cfg);
// Dispatch on cfg.experiment.
ExperimentTable run_experiment(const ExperimentConfig& cfg);

// All floating-point CSV output goes through one formatter ("%.12g").
std::string format_double(double v);
void write_records_csv(const std::vector<ExperimentRecord>& records, const std::string& path);

}  // namespace mrfmle
