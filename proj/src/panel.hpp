#pragma once

#include <Eigen/Core>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace synthctl {

struct ConflictEpisode {
  int start_year = 0;
  int end_year = 0;
};

struct PanelSchema {
  std::string unit_column = "unit";
  std::string year_column = "year";
  std::string outcome_column = "outcome";
};

// Balanced unit x year outcome panel with optional per-year covariate series
// (NaN marks a missing covariate cell; outcome cells are never missing) and
// per-unit conflict annotations.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<std::string> units, std::vector<int> periods,
               Eigen::MatrixXd outcomes, std::string outcome_label = "outcome");

  const std::vector<std::string>& units() const { return units_; }
  const std::vector<int>& periods() const { return periods_; }
  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const std::string& outcome_label() const { return outcome_label_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  int n_units() const { return static_cast<int>(units_.size()); }
  int n_periods() const { return static_cast<int>(periods_.size()); }
  int first_year() const { return periods_.front(); }
  int last_year() const { return periods_.back(); }

  int unit_index(const std::string& unit) const;            // -1 if absent
  int period_index(int year) const;                         // -1 if absent
  double outcome(const std::string& unit, int year) const;  // throws on miss
  Eigen::VectorXd outcome_series(const std::string& unit) const;

  const Eigen::MatrixXd& covariate_series(const std::string& name) const;
  bool has_covariate(const std::string& name) const;
  void add_covariate(const std::string& name, Eigen::MatrixXd series);

  // Mean over [year_lo, year_hi] ignoring missing cells; NaN when a unit has
  // no observed value in the window.
  Eigen::VectorXd aggregate_covariate(const std::string& name, int year_lo,
                                      int year_hi) const;

  const std::map<std::string, std::vector<ConflictEpisode>>& conflicts() const {
    return conflicts_;
  }
  void set_conflicts(const std::string& unit, std::vector<ConflictEpisode> episodes);

  void set_outcome_label(std::string label) { outcome_label_ = std::move(label); }

  // Enforces the full invariant set; throws on violation.
  void validate() const;

 private:
  std::vector<std::string> units_;
  std::vector<int> periods_;
  Eigen::MatrixXd outcomes_;  // n_units x n_periods
  std::vector<std::string> covariate_names_;
  std::vector<Eigen::MatrixXd> covariate_series_;  // each n_units x n_periods
  std::map<std::string, std::vector<ConflictEpisode>> conflicts_;
  std::string outcome_label_ = "outcome";
};

struct ExclusionRules {
  std::optional<std::pair<int, int>> drop_conflict_window;
  std::vector<std::string> drop_units;
  std::vector<std::string> keep_units;  // empty = no allowlist

  bool empty() const {
    return !drop_conflict_window && drop_units.empty() && keep_units.empty();
  }
};

struct ConflictLoadResult {
  std::map<std::string, std::vector<ConflictEpisode>> episodes;
  std::vector<std::string> unknown_units;  // present in file, not in panel
  int dropped_out_of_range = 0;
};

PanelDataset load_panel(std::istream& in, const PanelSchema& schema = {});
PanelDataset load_panel_file(const std::string& path, const PanelSchema& schema = {});

// Attaches conflict episodes parsed from `unit,start_year,end_year` rows.
// Episodes that do not overlap the panel's period range and units missing
// from the panel are reported, not stored.
ConflictLoadResult load_conflicts(std::istream& in, PanelDataset& panel);
ConflictLoadResult load_conflicts_file(const std::string& path, PanelDataset& panel);

void write_panel(const PanelDataset& panel, std::ostream& out,
                 const PanelSchema& schema = {});
void write_panel_file(const PanelDataset& panel, const std::string& path,
                      const PanelSchema& schema = {});

PanelDataset filter_donors(const PanelDataset& panel, const ExclusionRules& rules,
                           const std::string& treated_unit);

PanelDataset restrict_window(const PanelDataset& panel, int start_year, int end_year);

}  // namespace synthctl
