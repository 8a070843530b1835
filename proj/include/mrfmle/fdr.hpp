#pragma once

#include <utility>

#include "mrfmle/inference.hpp"

namespace mrfmle {

// How the tuning triple (lambda1, lambda2, lambda_prime) is chosen when a
// pipeline fits a dataset it is handed.
enum class LambdaRule {
  CrossValidate,  // default_penalty_grid + k-fold CV (the default)
  RateFormula,    // lambda1 = c * (sqrt(log p/n) + sqrt(log p/m) + log p/m)
  Fixed           // use the lambda fields of `solver` as given
};

// Everything needed to run "fit elastic net, then one-step inference on every
// coordinate" on a dataset: solver tolerances plus the lambda selection rule.
struct InferencePipelineConfig {
  PenaltyConfig solver;  // tolerances/step; its lambdas are used when rule == Fixed
  LambdaRule lambda_rule = LambdaRule::CrossValidate;
  int cv_folds = 5;
  double rate_constant = 0.1;   // RateFormula: lambda1 = rate_constant * rate
  double lambda2_factor = 0.1;  // RateFormula: lambda2 = lambda2_factor * lambda1
  double eta = 0.05;            // CI level passed through to inference
};

PenaltyConfig choose_penalty(const FeatureMap& fm, const ObservedSample& obs,
                             const ReferenceChain& ref, const InferencePipelineConfig& cfg,
                             RngSeed cv_seed);

struct PipelineResult {
  PenaltyConfig chosen;
  FitResult fit;
  std::vector<InferenceResult> coords;  // in `targets` order
};

// Fit + per-coordinate one-step inference; empty `targets` means all p.
PipelineResult fit_and_infer_all(const FeatureMap& fm, const ObservedSample& obs,
                                 const ReferenceChain& ref,
                                 const InferencePipelineConfig& cfg, RngSeed cv_seed,
                                 std::vector<int> targets = {});

enum class MirrorKind { Product, Sum };
enum class SelectionMethod { SingleSplit, MultiSplit, EBH };

struct MirrorConfig {
  MirrorKind f_kind = MirrorKind::Product;
  double q = 0.05;
  int n_splits = 1;
  RngSeed seed;
};

struct MirrorStatistics {
  Vec m_values;  // p; NaN where either half statistic is undefined
  Vec t1;
  Vec t2;
  double tau_q = 0.0;
  std::vector<std::pair<double, double>> fdp_hat_curve;  // (cutoff, fdp_hat), ascending
};

struct SelectionResult {
  std::vector<int> selected;  // ascending coordinate indices
  SelectionMethod method = SelectionMethod::SingleSplit;
  double q = 0.0;
  // Per-method diagnostics (filled for the producing method only).
  MirrorStatistics mirror;        // SingleSplit
  Vec inclusion_rates;            // MultiSplit
  double inclusion_threshold = 0.0;
  Vec e_values;                   // EBH
  int k_star = 0;
};

// One random half/half split with the full pipeline run on each half.
struct SplitInference {
  Vec t1;  // T_j for half 1: (theta_tilde_j - null_j) * sqrt(n * h_j / 2), NaN if undefined
  Vec t2;
  std::vector<int> half1;  // row indices (sizes floor(n/2), ceil(n/2))
  std::vector<int> half2;
  PipelineResult pipe1;
  PipelineResult pipe2;
  std::vector<int> undefined_coords;  // h_hat <= 0 on either half
};

// Splits observed rows at random, shares the reference chain between halves,
// and normalizes the one-step estimates against null_values with the FULL
// sample size n under the root.
SplitInference split_and_infer(const FeatureMap& fm, const ObservedSample& obs,
                               const ReferenceChain& ref, const InferencePipelineConfig& cfg,
                               const Vec& null_values, RngSeed seed);

// Single-split mirror selection: M_j = sgn(t1 t2) f(|t1|,|t2|), cutoff from the
// estimated-FDP sweep over candidate cutoffs {|M_j|}, selected = {M_j > tau_q}.
SelectionResult mirror_select(const Vec& t1, const Vec& t2, const MirrorConfig& cfg);

// Selection step of the multi-split procedure, exposed for direct testing:
// sort rates ascending, take the largest prefix with sum <= q, threshold at
// the last prefix element (0 when the prefix is empty), select strictly above.
SelectionResult select_from_inclusion_rates(const Vec& inclusion_rates, double q);

// Runs n_splits split+mirror rounds on substream seeds and aggregates
// inclusion rates I_j = mean_k 1(j in S_k)/|S_k| (0 for empty S_k).
SelectionResult multi_split_select(const FeatureMap& fm, const ObservedSample& obs,
                                   const ReferenceChain& ref, const MirrorConfig& cfg,
                                   const InferencePipelineConfig& pipeline,
                                   const Vec& null_values, RngSeed seed);

// e-BH selection rule on raw e-values: sort descending (boundary ties broken
// by ascending coordinate index), k* = max{k : k e_(k) / p >= 1/q}, select the
// k* largest.
SelectionResult ebh_select_values(const Vec& e_values, double q);

// e-BH: e_k = sqrt(pi/2) sqrt(n h_k) |theta_tilde_k - null_k| from full-data
// inference (e = 0 when h <= 0), then ebh_select_values.
SelectionResult ebh_select(const std::vector<InferenceResult>& inference,
                           const Vec& null_values, double q, int n);

}  // namespace mrfmle
