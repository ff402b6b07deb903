#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "panel.hpp"

namespace synthctl {

enum class VMode { Equal, Nested, OutcomeLagsOnly };

const char* v_mode_name(VMode mode) noexcept;
VMode v_mode_from_name(const std::string& name);

struct PredictorSpec {
  std::string covariate;
  std::optional<std::pair<int, int>> window;  // aggregation years, default = pre window
};

struct StudySpec {
  std::string treated_unit;
  int t0 = 0;                        // last pre-treatment year
  std::optional<int> match_end;      // matching window end, default t0
  std::vector<PredictorSpec> predictors;
  std::vector<int> special_predictors;  // outcome lag years, each <= t0
  VMode v_mode = VMode::Equal;
  double solver_tol = 1e-10;
  int max_iter = 100000;
  int v_starts = 10;
  std::uint64_t seed = 0;

  int effective_match_end() const { return match_end.value_or(t0); }
  void validate(const PanelDataset& panel) const;
};

struct SimplexWeights {
  std::vector<std::string> donors;
  Eigen::VectorXd w;  // donor order, nonnegative, sums to 1
};

struct PredictorWeights {
  std::vector<std::string> names;
  Eigen::VectorXd v;  // nonnegative, sums to 1
};

struct BalanceRow {
  std::string predictor;
  double treated = 0.0;
  double synthetic = 0.0;  // weighted donor average of the raw predictor
};

struct SynthFit {
  SimplexWeights weights;
  PredictorWeights v;
  std::vector<int> years;
  Eigen::VectorXd actual;          // treated outcome path
  Eigen::VectorXd synthetic_path;  // sum_j w_j Y_j,t
  Eigen::VectorXd gap_path;        // actual - synthetic
  Eigen::VectorXd ratio_path;      // actual / synthetic, NaN where synthetic == 0
  double rmspe_pre = 0.0;          // over years <= match_end
  double rmspe_post = 0.0;         // over years > t0
  std::vector<BalanceRow> balance;
  StudySpec spec_echo;
  std::vector<std::string> warnings;

  int pre_period_count() const;
  int post_period_count() const;
  Eigen::VectorXd post_gaps() const;
};

// Predictor rows standardized over {treated} + donors; raw rows kept for the
// balance table. Rows follow spec order: covariate aggregates, then outcome
// lags. Unusable predictors (no data for some unit, or zero variance) are
// dropped with a warning.
struct PredictorMatrices {
  std::vector<std::string> names;
  std::vector<std::string> donors;
  Eigen::VectorXd x1;       // standardized treated values (k)
  Eigen::MatrixXd x0;       // standardized donor values (k x J)
  Eigen::VectorXd raw_x1;   // unstandardized treated values
  Eigen::MatrixXd raw_x0;   // unstandardized donor values
  std::vector<std::string> warnings;
};

PredictorMatrices build_predictor_matrices(const PanelDataset& panel,
                                           const StudySpec& spec);

struct SimplexSolution {
  Eigen::VectorXd w;
  double objective = 0.0;  // sum_k v_k (x1_k - x0_k . w)^2
  double gap = 0.0;        // certified bound on objective suboptimality
  int iterations = 0;
};

// Convex least squares over the unit simplex via away-step Frank-Wolfe with
// exact line search. Stops once the duality gap certifies the objective is
// within `tol` of the optimum; throws SolverDiverged at the iteration cap.
SimplexSolution solve_weights(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0,
                              const Eigen::VectorXd& v, double tol = 1e-10,
                              int max_iter = 100000);

PredictorWeights optimize_v(const PanelDataset& panel, const StudySpec& spec);

SynthFit fit_synth(const PanelDataset& panel, const StudySpec& spec);

double rmspe(std::span<const double> gaps);
double rmspe(const Eigen::VectorXd& gaps);

struct EffectSummary {
  double average_post_ratio = 0.0;
  double end_of_sample_ratio = 0.0;
  double average_post_gap = 0.0;
};

EffectSummary effect_summary(const SynthFit& fit);

}  // namespace synthctl
