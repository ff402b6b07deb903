#include "inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "util.hpp"

namespace synthctl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<const PlaceboFit*> PlaceboSet::successful() const {
  std::vector<const PlaceboFit*> out;
  for (const auto& pf : placebo_fits)
    if (pf.ok) out.push_back(&pf);
  return out;
}

PlaceboSet in_space_placebos(const PanelDataset& panel, const StudySpec& spec,
                             int threads) {
  spec.validate(panel);
  if (panel.n_units() < 3)
    raise(ErrorClass::InvalidArgument, "in-space placebos need at least 2 donors");

  PlaceboSet out;
  out.t0 = spec.t0;
  out.treated_fit = fit_synth(panel, spec);

  std::vector<std::string> donors;
  for (const auto& u : panel.units())
    if (u != spec.treated_unit) donors.push_back(u);

  // each placebo pool drops the true treated unit
  ExclusionRules drop_treated;
  drop_treated.drop_units.push_back(spec.treated_unit);

  out.placebo_fits.resize(donors.size());
  parallel_for(donors.size(), threads, [&](std::size_t i) {
    PlaceboFit& pf = out.placebo_fits[i];
    pf.unit = donors[i];
    try {
      PanelDataset placebo_panel = filter_donors(panel, drop_treated, donors[i]);
      StudySpec placebo_spec = spec;
      placebo_spec.treated_unit = donors[i];
      pf.fit = fit_synth(placebo_panel, placebo_spec);
      pf.ok = true;
    } catch (const Error& e) {
      pf.error = std::string(error_class_name(e.cls())) + ": " + e.what();
    }
  });
  return out;
}

PValueSeries pvalue_series(const PlaceboSet& ps,
                           std::optional<double> filter_multiple) {
  if (filter_multiple && !(*filter_multiple > 1.0))
    raise(ErrorClass::InvalidArgument, "RMSPE filter multiple must exceed 1");

  std::vector<const PlaceboFit*> survivors;
  for (const auto* pf : ps.successful()) {
    if (filter_multiple &&
        pf->fit.rmspe_pre > *filter_multiple * ps.treated_fit.rmspe_pre)
      continue;
    survivors.push_back(pf);
  }
  if (survivors.empty())
    raise(ErrorClass::AllPlacebosFiltered,
          "no placebo fits survive the RMSPE filter");

  const SynthFit& tf = ps.treated_fit;
  PValueSeries out;
  out.filter_multiple = filter_multiple;
  out.survivors = static_cast<int>(survivors.size());
  for (std::size_t i = 0; i < tf.years.size(); ++i) {
    int year = tf.years[i];
    if (year <= ps.t0) continue;
    double treated_gap = std::abs(tf.gap_path[static_cast<int>(i)]);
    int at_least = 1;  // the treated unit itself
    for (const auto* pf : survivors) {
      int p = static_cast<int>(std::find(pf->fit.years.begin(), pf->fit.years.end(),
                                         year) -
                               pf->fit.years.begin());
      if (p >= static_cast<int>(pf->fit.years.size())) continue;
      if (std::abs(pf->fit.gap_path[p]) >= treated_gap) ++at_least;
    }
    out.years.push_back(year);
    out.p.push_back(static_cast<double>(at_least) /
                    static_cast<double>(survivors.size() + 1));
  }
  return out;
}

RatioTestResult rmspe_ratio_test(const PlaceboSet& ps) {
  RatioTestResult out;
  const SynthFit& tf = ps.treated_fit;
  if (!(tf.rmspe_pre > 0.0))
    raise(ErrorClass::ZeroPreRmspe,
          "treated unit has zero pre-period RMSPE; the ratio is undefined");
  out.rows.push_back({tf.spec_echo.treated_unit, tf.rmspe_pre, tf.rmspe_post,
                      tf.rmspe_post / tf.rmspe_pre});
  for (const auto* pf : ps.successful()) {
    if (!(pf->fit.rmspe_pre > 0.0)) {
      out.warnings.push_back("unit '" + pf->unit +
                             "' excluded: zero pre-period RMSPE");
      continue;
    }
    out.rows.push_back({pf->unit, pf->fit.rmspe_pre, pf->fit.rmspe_post,
                        pf->fit.rmspe_post / pf->fit.rmspe_pre});
  }
  double treated_ratio = out.rows.front().ratio;
  int rank = 1;
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (out.rows[i].ratio >= treated_ratio) ++rank;
  out.treated_rank = rank;
  out.p_value = static_cast<double>(rank) / static_cast<double>(out.rows.size());
  return out;
}

InTimePlacebo in_time_placebo(const PanelDataset& panel, const StudySpec& spec,
                              int false_t0) {
  spec.validate(panel);
  StudySpec moved = spec;
  moved.t0 = false_t0;
  if (spec.match_end)
    moved.match_end = *spec.match_end + (false_t0 - spec.t0);
  moved.validate(panel);

  InTimePlacebo out;
  SynthFit baseline = fit_synth(panel, spec);
  out.fit = fit_synth(panel, moved);
  out.baseline_rmspe_pre = baseline.rmspe_pre;
  out.rmspe_pre_ratio = baseline.rmspe_pre > 0.0
                            ? out.fit.rmspe_pre / baseline.rmspe_pre
                            : kNaN;
  return out;
}

std::vector<double> symmetric_grid(double half_width, int points) {
  if (!(half_width > 0) || points < 2)
    raise(ErrorClass::InvalidArgument,
          "grid needs a positive half-width and at least 2 points");
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = -half_width + 2.0 * half_width * i / (points - 1);
  // exact symmetry, immune to rounding
  for (int i = 0; i < points / 2; ++i) grid[points - 1 - i] = -grid[i];
  if (points % 2 == 1) grid[points / 2] = 0.0;
  return grid;
}

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) raise(ErrorClass::InvalidArgument, "offset grid is empty");
  double scale = 0.0;
  for (double g : grid) scale = std::max(scale, std::abs(g));
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    double mirror = -sorted[sorted.size() - 1 - i];
    if (std::abs(sorted[i] - mirror) > 1e-9 * std::max(1.0, scale))
      raise(ErrorClass::InvalidArgument, "offset grid must be symmetric around 0");
  }
}

}  // namespace

EffectBand confidence_band(const PlaceboSet& ps, double alpha,
                           const std::vector<double>& grid) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    raise(ErrorClass::InvalidArgument, "alpha must lie in (0, 1)");
  check_grid(grid);
  const SynthFit& tf = ps.treated_fit;
  if (!(tf.rmspe_pre > 0.0))
    raise(ErrorClass::ZeroPreRmspe, "treated pre-period RMSPE is zero");

  std::vector<double> placebo_ratios;
  for (const auto* pf : ps.successful())
    if (pf->fit.rmspe_pre > 0.0)
      placebo_ratios.push_back(pf->fit.rmspe_post / pf->fit.rmspe_pre);
  if (placebo_ratios.empty())
    raise(ErrorClass::AllPlacebosFiltered, "no usable placebo fits");

  Eigen::VectorXd post_gap = tf.post_gaps();
  const int n_units = static_cast<int>(placebo_ratios.size()) + 1;
  auto p_at = [&](double delta) {
    Eigen::VectorXd shifted = post_gap.array() - delta;
    double ratio = rmspe(shifted) / tf.rmspe_pre;
    int rank = 1;
    for (double r : placebo_ratios)
      if (r >= ratio) ++rank;
    return static_cast<double>(rank) / n_units;
  };

  EffectBand band;
  band.alpha = alpha;
  band.p_at_zero = p_at(0.0);
  for (double delta : grid)
    if (p_at(delta) > alpha) band.accepted_offsets.push_back(delta);

  for (std::size_t i = 0; i < tf.years.size(); ++i)
    if (tf.years[i] > ps.t0) band.years.push_back(tf.years[i]);

  if (band.accepted_offsets.empty()) {
    if (band.p_at_zero > alpha)
      raise(ErrorClass::GridTooCoarse,
            "no grid offset accepted although the zero offset has p > alpha; "
            "widen or refine the offset grid");
    band.empty_set = true;
    band.gap_lower.assign(band.years.size(), kNaN);
    band.gap_upper.assign(band.years.size(), kNaN);
    band.ratio_lower.assign(band.years.size(), kNaN);
    band.ratio_upper.assign(band.years.size(), kNaN);
    return band;
  }

  auto [lo_it, hi_it] = std::minmax_element(band.accepted_offsets.begin(),
                                            band.accepted_offsets.end());
  double lo = *lo_it, hi = *hi_it;
  for (std::size_t i = 0, k = 0; i < tf.years.size(); ++i) {
    if (tf.years[i] <= ps.t0) continue;
    double synth = tf.synthetic_path[static_cast<int>(i)];
    band.gap_lower.push_back(lo);
    band.gap_upper.push_back(hi);
    if (synth > 0.0) {
      band.ratio_lower.push_back(1.0 + lo / synth);
      band.ratio_upper.push_back(1.0 + hi / synth);
    } else {
      band.ratio_lower.push_back(kNaN);
      band.ratio_upper.push_back(kNaN);
    }
    ++k;
  }
  return band;
}

EffectBand confidence_band(const PanelDataset& panel, const StudySpec& spec,
                           double alpha, const std::vector<double>& grid,
                           int threads) {
  PlaceboSet ps = in_space_placebos(panel, spec, threads);
  return confidence_band(ps, alpha, grid);
}

}  // namespace synthctl
