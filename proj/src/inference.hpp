#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scm.hpp"

namespace synthctl {

struct PlaceboFit {
  std::string unit;
  bool ok = false;
  SynthFit fit;         // valid when ok
  std::string error;    // "Class: message" when !ok
};

// One placebo fit per donor, identical spec except the treated-unit swap,
// with the true treated unit removed from every placebo pool.
struct PlaceboSet {
  SynthFit treated_fit;
  std::vector<PlaceboFit> placebo_fits;  // donor order
  int t0 = 0;

  std::vector<const PlaceboFit*> successful() const;
};

PlaceboSet in_space_placebos(const PanelDataset& panel, const StudySpec& spec,
                             int threads = 1);

struct PValueSeries {
  std::vector<int> years;      // post periods
  std::vector<double> p;       // in (0, 1]
  std::optional<double> filter_multiple;
  int survivors = 0;           // placebo fits that pass the RMSPE filter
};

PValueSeries pvalue_series(const PlaceboSet& ps,
                           std::optional<double> filter_multiple = std::nullopt);

struct RatioTestRow {
  std::string unit;
  double rmspe_pre = 0.0;
  double rmspe_post = 0.0;
  double ratio = 0.0;
};

struct RatioTestResult {
  std::vector<RatioTestRow> rows;  // treated first, then donors in order
  int treated_rank = 0;            // 1 = largest ratio
  double p_value = 0.0;            // rank / number of units
  std::vector<std::string> warnings;
};

RatioTestResult rmspe_ratio_test(const PlaceboSet& ps);

struct InTimePlacebo {
  SynthFit fit;
  double baseline_rmspe_pre = 0.0;
  double rmspe_pre_ratio = 0.0;  // fit.rmspe_pre / baseline
};

// Refit with the intervention date moved to false_t0; an explicit matching
// window shifts by the same offset so the false date is actually exercised.
InTimePlacebo in_time_placebo(const PanelDataset& panel, const StudySpec& spec,
                              int false_t0);

struct EffectBand {
  double alpha = 0.0;
  std::vector<int> years;            // post periods
  std::vector<double> gap_lower, gap_upper;
  std::vector<double> ratio_lower, ratio_upper;
  std::vector<double> accepted_offsets;
  double p_at_zero = 0.0;
  bool empty_set = false;  // every offset rejected; bounds are NaN
};

std::vector<double> symmetric_grid(double half_width, int points);

// Test inversion over constant post-period gap offsets: an offset survives
// when subtracting it from the treated post outcomes leaves the treated
// RMSPE ratio unexceptional at level alpha. The surviving offsets form the
// band; ratio bounds map them through the synthetic path.
EffectBand confidence_band(const PanelDataset& panel, const StudySpec& spec,
                           double alpha, const std::vector<double>& grid,
                           int threads = 1);

EffectBand confidence_band(const PlaceboSet& ps, double alpha,
                           const std::vector<double>& grid);

}  // namespace synthctl
