#include "scm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rng.hpp"

namespace synthctl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const char* v_mode_name(VMode mode) noexcept {
  switch (mode) {
    case VMode::Equal: return "equal";
    case VMode::Nested: return "nested";
    case VMode::OutcomeLagsOnly: return "outcome_lags_only";
  }
  return "equal";
}

VMode v_mode_from_name(const std::string& name) {
  if (name == "equal") return VMode::Equal;
  if (name == "nested") return VMode::Nested;
  if (name == "outcome_lags_only") return VMode::OutcomeLagsOnly;
  raise(ErrorClass::InvalidArgument, "unknown v_mode '" + name + "'");
}

void StudySpec::validate(const PanelDataset& panel) const {
  if (panel.unit_index(treated_unit) < 0)
    raise(ErrorClass::InvalidArgument,
          "treated unit '" + treated_unit + "' not in panel");
  int t0_idx = panel.period_index(t0);
  if (t0_idx < 0)
    raise(ErrorClass::WindowError,
          "t0 = " + std::to_string(t0) + " outside panel years [" +
              std::to_string(panel.first_year()) + ", " +
              std::to_string(panel.last_year()) + "]");
  if (t0_idx < 2)
    raise(ErrorClass::WindowError,
          "t0 = " + std::to_string(t0) + " needs at least 2 earlier periods");
  if (t0_idx >= panel.n_periods() - 1)
    raise(ErrorClass::WindowError,
          "t0 = " + std::to_string(t0) + " needs at least 1 later period");
  int me = effective_match_end();
  int me_idx = panel.period_index(me);
  if (me_idx < 0 || me > t0)
    raise(ErrorClass::WindowError,
          "match_end = " + std::to_string(me) + " must lie in the panel and not exceed t0");
  if (me_idx < 1)
    raise(ErrorClass::WindowError,
          "match_end = " + std::to_string(me) + " needs at least 2 periods at or before it");
  for (int year : special_predictors) {
    if (year > t0)
      raise(ErrorClass::WindowError,
            "special predictor year " + std::to_string(year) + " exceeds t0");
    if (panel.period_index(year) < 0)
      raise(ErrorClass::WindowError,
            "special predictor year " + std::to_string(year) + " outside panel");
  }
  for (const auto& p : predictors) {
    if (!panel.has_covariate(p.covariate))
      raise(ErrorClass::InvalidArgument,
            "predictor covariate '" + p.covariate + "' not in panel");
    if (p.window && p.window->first > p.window->second)
      raise(ErrorClass::InvalidArgument,
            "predictor '" + p.covariate + "' has an inverted window");
  }
  if (predictors.empty() && special_predictors.empty())
    raise(ErrorClass::InvalidArgument, "spec names no predictors");
  if (!(solver_tol > 0))
    raise(ErrorClass::InvalidArgument, "solver_tol must be positive");
  if (max_iter < 1) raise(ErrorClass::InvalidArgument, "max_iter must be >= 1");
  if (v_starts < 1) raise(ErrorClass::InvalidArgument, "v_starts must be >= 1");
}

int SynthFit::pre_period_count() const {
  int me = spec_echo.effective_match_end();
  int count = 0;
  for (int y : years)
    if (y <= me) ++count;
  return count;
}

int SynthFit::post_period_count() const {
  int count = 0;
  for (int y : years)
    if (y > spec_echo.t0) ++count;
  return count;
}

Eigen::VectorXd SynthFit::post_gaps() const {
  int n_post = post_period_count();
  Eigen::VectorXd out(n_post);
  int k = 0;
  for (std::size_t i = 0; i < years.size(); ++i)
    if (years[i] > spec_echo.t0) out[k++] = gap_path[static_cast<int>(i)];
  return out;
}

PredictorMatrices build_predictor_matrices(const PanelDataset& panel,
                                           const StudySpec& spec) {
  spec.validate(panel);
  int treated_idx = panel.unit_index(spec.treated_unit);
  PredictorMatrices out;
  for (int u = 0; u < panel.n_units(); ++u)
    if (u != treated_idx) out.donors.push_back(panel.units()[u]);
  int n_donors = static_cast<int>(out.donors.size());
  if (n_donors < 1) raise(ErrorClass::EmptyDonorPool, "no donors in panel");

  int match_end = spec.effective_match_end();
  struct Row {
    std::string name;
    Eigen::VectorXd values;  // all units, panel order
  };
  std::vector<Row> rows;

  for (const auto& p : spec.predictors) {
    int lo = p.window ? p.window->first : panel.first_year();
    int hi = p.window ? p.window->second : match_end;
    Eigen::VectorXd agg = panel.aggregate_covariate(p.covariate, lo, hi);
    std::ostringstream name;
    name << p.covariate;
    if (p.window) name << '(' << lo << '-' << hi << ')';
    bool missing = false;
    for (int u = 0; u < panel.n_units(); ++u)
      if (std::isnan(agg[u])) { missing = true; break; }
    if (missing) {
      out.warnings.push_back("predictor '" + name.str() +
                             "' dropped: missing value for at least one unit");
      continue;
    }
    rows.push_back({name.str(), std::move(agg)});
  }
  for (int year : spec.special_predictors) {
    int p = panel.period_index(year);
    rows.push_back({panel.outcome_label() + "(" + std::to_string(year) + ")",
                    panel.outcomes().col(p)});
  }

  // standardize over treated + donors, dropping zero-variance rows
  std::vector<Row> raw_kept, std_kept;
  for (auto& row : rows) {
    double mean = row.values.mean();
    double sd = std::sqrt((row.values.array() - mean).square().mean());
    double scale = std::max(1.0, std::abs(mean));
    if (sd <= 1e-12 * scale) {
      out.warnings.push_back("predictor '" + row.name +
                             "' dropped: zero variance across units");
      continue;
    }
    std_kept.push_back({row.name, (row.values.array() - mean) / sd});
    raw_kept.push_back(std::move(row));
  }
  if (std_kept.empty())
    raise(ErrorClass::PredictorAllMissing,
          "no usable predictors remain (all missing or zero variance)");

  int k = static_cast<int>(std_kept.size());
  out.x1.resize(k);
  out.x0.resize(k, n_donors);
  out.raw_x1.resize(k);
  out.raw_x0.resize(k, n_donors);
  for (int r = 0; r < k; ++r) {
    out.names.push_back(std_kept[r].name);
    out.x1[r] = std_kept[r].values[treated_idx];
    out.raw_x1[r] = raw_kept[r].values[treated_idx];
    int d = 0;
    for (int u = 0; u < panel.n_units(); ++u) {
      if (u == treated_idx) continue;
      out.x0(r, d) = std_kept[r].values[u];
      out.raw_x0(r, d) = raw_kept[r].values[u];
      ++d;
    }
  }
  return out;
}

SimplexSolution solve_weights(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0,
                              const Eigen::VectorXd& v, double tol, int max_iter) {
  const int k = static_cast<int>(x1.size());
  const int J = static_cast<int>(x0.cols());
  if (J < 1) raise(ErrorClass::EmptyDonorPool, "x0 has no donor columns");
  if (x0.rows() != k || v.size() != k)
    raise(ErrorClass::DimensionMismatch, "x1/x0/v dimensions disagree");
  if (!(tol > 0)) raise(ErrorClass::InvalidArgument, "tol must be positive");
  for (int i = 0; i < k; ++i)
    if (v[i] < 0)
      raise(ErrorClass::InvalidArgument, "predictor weights must be nonnegative");

  SimplexSolution sol;
  if (J == 1) {
    sol.w = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd r = x1 - x0.col(0);
    sol.objective = (v.array() * r.array().square()).sum();
    sol.gap = 0.0;
    return sol;
  }

  Eigen::VectorXd sv = v.array().sqrt();
  Eigen::MatrixXd a = sv.asDiagonal() * x0;   // k x J
  Eigen::VectorXd b = sv.asDiagonal() * x1;   // k
  Eigen::MatrixXd m = a.transpose() * a;      // J x J Gram
  Eigen::VectorXd q = a.transpose() * b;
  const double c0 = b.squaredNorm();

  auto objective = [&](const Eigen::VectorXd& w) {
    return std::max(0.0, w.dot(m * w) - 2.0 * q.dot(w) + c0);
  };

  // start at the best single donor, lowest index on ties
  int best = 0;
  double best_obj = m(0, 0) - 2.0 * q[0];
  for (int j = 1; j < J; ++j) {
    double o = m(j, j) - 2.0 * q[j];
    if (o < best_obj) { best_obj = o; best = j; }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(J);
  w[best] = 1.0;
  Eigen::VectorXd mw = m.col(best);

  bool converged = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    if ((it & 1023) == 1023) mw = m * w;  // counter fp drift in the running product
    Eigen::VectorXd g = 2.0 * (mw - q);

    int s = 0;
    for (int j = 1; j < J; ++j)
      if (g[j] < g[s]) s = j;
    double gw = g.dot(w);
    double fw_gap = gw - g[s];
    if (fw_gap <= tol) { converged = true; break; }

    int away = -1;
    double away_g = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < J; ++j)
      if (w[j] > 0.0 && g[j] > away_g) { away_g = g[j]; away = j; }

    bool fw_step = (gw - g[s]) >= (away_g - gw) || away < 0;
    Eigen::VectorXd d;
    double gamma_max;
    if (fw_step) {
      d = -w;
      d[s] += 1.0;
      gamma_max = 1.0;
    } else {
      d = w;
      d[away] -= 1.0;
      gamma_max = w[away] < 1.0 ? w[away] / (1.0 - w[away])
                                : std::numeric_limits<double>::infinity();
    }
    double gd = g.dot(d);
    if (gd >= 0.0) { converged = fw_gap <= tol; break; }
    Eigen::VectorXd md = m * d;
    double dmd = d.dot(md);
    double gamma = dmd > 0.0 ? std::min(gamma_max, -gd / (2.0 * dmd)) : gamma_max;
    if (!(gamma > 0.0) || !std::isfinite(gamma)) break;
    w += gamma * d;
    mw += gamma * md;
    if (!fw_step && gamma >= gamma_max * (1.0 - 1e-12)) w[away] = 0.0;  // drop step
    for (int j = 0; j < J; ++j)
      if (w[j] < 0.0) w[j] = 0.0;
    double sum = w.sum();
    if (std::abs(sum - 1.0) > 1e-13) { w /= sum; mw = m * w; }
  }

  if (!converged) {
    // final certificate
    Eigen::VectorXd g = 2.0 * (m * w - q);
    double gmin = g.minCoeff();
    double fw_gap = g.dot(w) - gmin;
    if (fw_gap > tol)
      raise(ErrorClass::SolverDiverged,
            "simplex solver hit the iteration cap (" + std::to_string(max_iter) +
                ") with certified gap " + std::to_string(fw_gap));
    sol.gap = fw_gap;
  }

  {
    Eigen::VectorXd g = 2.0 * (m * w - q);
    sol.gap = std::max(0.0, g.dot(w) - g.minCoeff());
  }
  sol.w = w;
  sol.objective = objective(w);
  sol.iterations = it;
  return sol;
}

namespace {

// pre-window outcome MSPE of the weights induced by a candidate v
struct NestedObjective {
  const PredictorMatrices& mats;
  Eigen::VectorXd treated_pre;   // outcomes <= match_end
  Eigen::MatrixXd donors_pre;    // n_pre x J
  double solver_tol;
  int max_iter;

  double operator()(const Eigen::VectorXd& v) const {
    SimplexSolution s = solve_weights(mats.x1, mats.x0, v, solver_tol, max_iter);
    Eigen::VectorXd synth = donors_pre * s.w;
    return (treated_pre - synth).squaredNorm() / treated_pre.size();
  }
};

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd shifted = z.array() - z.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

// Nelder-Mead on the softmax parametrization, returns best (value, v)
std::pair<double, Eigen::VectorXd> nelder_mead_simplex(
    const NestedObjective& obj, const Eigen::VectorXd& z0, int max_evals) {
  const int n = static_cast<int>(z0.size());
  struct Point {
    Eigen::VectorXd z;
    double f;
  };
  auto eval = [&](const Eigen::VectorXd& z) { return obj(softmax(z)); };

  std::vector<Point> simplex;
  simplex.push_back({z0, eval(z0)});
  int evals = 1;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z = z0;
    z[i] += 0.5;
    simplex.push_back({z, eval(z)});
    ++evals;
  }
  auto by_value = [](const Point& a, const Point& b) { return a.f < b.f; };
  std::sort(simplex.begin(), simplex.end(), by_value);

  while (evals < max_evals) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i].z;
    centroid /= n;
    const Point& worst = simplex[n];

    Eigen::VectorXd zr = centroid + (centroid - worst.z);
    double fr = eval(zr);
    ++evals;
    if (fr < simplex[0].f) {
      Eigen::VectorXd ze = centroid + 2.0 * (centroid - worst.z);
      double fe = eval(ze);
      ++evals;
      if (fe < fr) simplex[n] = {ze, fe};
      else simplex[n] = {zr, fr};
    } else if (fr < simplex[n - 1].f) {
      simplex[n] = {zr, fr};
    } else {
      Eigen::VectorXd zc = centroid + 0.5 * (worst.z - centroid);
      double fc = eval(zc);
      ++evals;
      if (fc < worst.f) {
        simplex[n] = {zc, fc};
      } else {
        for (int i = 1; i <= n; ++i) {
          simplex[i].z = simplex[0].z + 0.5 * (simplex[i].z - simplex[0].z);
          simplex[i].f = eval(simplex[i].z);
          ++evals;
          if (evals >= max_evals) break;
        }
      }
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
    double spread = simplex[n].f - simplex[0].f;
    if (spread < 1e-14 * (1.0 + std::abs(simplex[0].f))) break;
  }
  return {simplex[0].f, softmax(simplex[0].z)};
}

}  // namespace

PredictorWeights optimize_v(const PanelDataset& panel, const StudySpec& spec) {
  PredictorMatrices mats = build_predictor_matrices(panel, spec);
  const int k = static_cast<int>(mats.names.size());
  PredictorWeights out;
  out.names = mats.names;

  switch (spec.v_mode) {
    case VMode::Equal:
      out.v = Eigen::VectorXd::Constant(k, 1.0 / k);
      return out;
    case VMode::OutcomeLagsOnly: {
      int n_lags = 0;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
      std::string lag_prefix = panel.outcome_label() + "(";
      for (int i = 0; i < k; ++i)
        if (mats.names[i].rfind(lag_prefix, 0) == 0) { v[i] = 1.0; ++n_lags; }
      if (n_lags == 0)
        raise(ErrorClass::InvalidArgument,
              "outcome_lags_only requires at least one outcome lag predictor");
      out.v = v / n_lags;
      return out;
    }
    case VMode::Nested:
      break;
  }

  // nested: seeded multi-start local search over the predictor simplex,
  // scored by pre-window outcome MSPE of the induced donor weights
  int treated_idx = panel.unit_index(spec.treated_unit);
  int me_idx = panel.period_index(spec.effective_match_end());
  int n_pre = me_idx + 1;
  int n_donors = static_cast<int>(mats.donors.size());
  NestedObjective obj{mats, Eigen::VectorXd(n_pre),
                      Eigen::MatrixXd(n_pre, n_donors), spec.solver_tol,
                      spec.max_iter};
  obj.treated_pre = panel.outcomes().row(treated_idx).head(n_pre).transpose();
  int d = 0;
  for (int u = 0; u < panel.n_units(); ++u)
    if (u != treated_idx)
      obj.donors_pre.col(d++) = panel.outcomes().row(u).head(n_pre).transpose();

  if (k == 1) {
    out.v = Eigen::VectorXd::Ones(1);
    return out;
  }

  const int evals_per_start = 120 + 20 * k;
  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_v = Eigen::VectorXd::Constant(k, 1.0 / k);
  for (int start = 0; start < spec.v_starts; ++start) {
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(k);
    if (start > 0) {
      Rng rng(derive_seed(spec.seed, seed_stream::kVSearch, start));
      for (int i = 0; i < k; ++i) z0[i] = rng.normal();
    }
    auto [f, v] = nelder_mead_simplex(obj, z0, evals_per_start);
    if (f < best_f - 1e-15) {
      best_f = f;
      best_v = v;
    }
  }
  // renormalize against accumulated rounding
  best_v = best_v.cwiseMax(0.0);
  out.v = best_v / best_v.sum();
  return out;
}

SynthFit fit_synth(const PanelDataset& panel, const StudySpec& spec) {
  spec.validate(panel);
  int treated_idx = panel.unit_index(spec.treated_unit);
  if (panel.n_units() < 2) raise(ErrorClass::EmptyDonorPool, "no donors in panel");

  PredictorMatrices mats = build_predictor_matrices(panel, spec);
  PredictorWeights v = optimize_v(panel, spec);

  SimplexSolution sol;
  if (mats.donors.size() == 1) {
    sol.w = Eigen::VectorXd::Ones(1);  // degenerate pool, no optimization
  } else {
    sol = solve_weights(mats.x1, mats.x0, v.v, spec.solver_tol, spec.max_iter);
  }

  SynthFit fit;
  fit.weights.donors = mats.donors;
  fit.weights.w = sol.w;
  fit.v = v;
  fit.years = panel.periods();
  fit.warnings = mats.warnings;
  fit.spec_echo = spec;

  int n_periods = panel.n_periods();
  int n_donors = static_cast<int>(mats.donors.size());
  Eigen::MatrixXd donor_outcomes(n_donors, n_periods);
  int d = 0;
  for (int u = 0; u < panel.n_units(); ++u)
    if (u != treated_idx) donor_outcomes.row(d++) = panel.outcomes().row(u);

  fit.actual = panel.outcomes().row(treated_idx).transpose();
  fit.synthetic_path = donor_outcomes.transpose() * sol.w;
  fit.gap_path = fit.actual - fit.synthetic_path;
  fit.ratio_path.resize(n_periods);
  for (int p = 0; p < n_periods; ++p)
    fit.ratio_path[p] = fit.synthetic_path[p] != 0.0
                            ? fit.actual[p] / fit.synthetic_path[p]
                            : kNaN;

  int me_idx = panel.period_index(spec.effective_match_end());
  int t0_idx = panel.period_index(spec.t0);
  fit.rmspe_pre = rmspe(Eigen::VectorXd(fit.gap_path.head(me_idx + 1)));
  fit.rmspe_post =
      rmspe(Eigen::VectorXd(fit.gap_path.tail(n_periods - t0_idx - 1)));

  fit.balance.reserve(mats.names.size());
  Eigen::VectorXd synth_pred = mats.raw_x0 * sol.w;
  for (std::size_t r = 0; r < mats.names.size(); ++r)
    fit.balance.push_back({mats.names[r], mats.raw_x1[static_cast<int>(r)],
                           synth_pred[static_cast<int>(r)]});
  return fit;
}

double rmspe(std::span<const double> gaps) {
  if (gaps.empty()) raise(ErrorClass::EmptyWindow, "rmspe of an empty window");
  double acc = 0.0;
  for (double g : gaps) acc += g * g;
  return std::sqrt(acc / static_cast<double>(gaps.size()));
}

double rmspe(const Eigen::VectorXd& gaps) {
  return rmspe(std::span<const double>(gaps.data(), gaps.size()));
}

EffectSummary effect_summary(const SynthFit& fit) {
  int n_post = fit.post_period_count();
  if (n_post < 1) raise(ErrorClass::EmptyWindow, "fit has no post periods");
  EffectSummary out;
  double ratio_sum = 0.0, gap_sum = 0.0;
  for (std::size_t i = 0; i < fit.years.size(); ++i) {
    if (fit.years[i] <= fit.spec_echo.t0) continue;
    int p = static_cast<int>(i);
    if (fit.synthetic_path[p] == 0.0)
      raise(ErrorClass::ZeroSyntheticValue,
            "synthetic value is zero in " + std::to_string(fit.years[i]));
    ratio_sum += fit.actual[p] / fit.synthetic_path[p];
    gap_sum += fit.gap_path[p];
    out.end_of_sample_ratio = fit.actual[p] / fit.synthetic_path[p];
  }
  out.average_post_ratio = ratio_sum / n_post;
  out.average_post_gap = gap_sum / n_post;
  return out;
}

}  // namespace synthctl
