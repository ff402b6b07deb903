#include "panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "util.hpp"

namespace synthctl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool overlaps(const ConflictEpisode& e, int lo, int hi) {
  return e.start_year <= hi && e.end_year >= lo;
}

}  // namespace

PanelDataset::PanelDataset(std::vector<std::string> units, std::vector<int> periods,
                           Eigen::MatrixXd outcomes, std::string outcome_label)
    : units_(std::move(units)),
      periods_(std::move(periods)),
      outcomes_(std::move(outcomes)),
      outcome_label_(std::move(outcome_label)) {
  validate();
}

int PanelDataset::unit_index(const std::string& unit) const {
  auto it = std::find(units_.begin(), units_.end(), unit);
  return it == units_.end() ? -1 : static_cast<int>(it - units_.begin());
}

int PanelDataset::period_index(int year) const {
  if (periods_.empty() || year < periods_.front() || year > periods_.back())
    return -1;
  return year - periods_.front();
}

double PanelDataset::outcome(const std::string& unit, int year) const {
  int ui = unit_index(unit);
  int pi = period_index(year);
  if (ui < 0) raise(ErrorClass::InvalidArgument, "unknown unit '" + unit + "'");
  if (pi < 0)
    raise(ErrorClass::InvalidArgument,
          "year " + std::to_string(year) + " outside panel range");
  return outcomes_(ui, pi);
}

Eigen::VectorXd PanelDataset::outcome_series(const std::string& unit) const {
  int ui = unit_index(unit);
  if (ui < 0) raise(ErrorClass::InvalidArgument, "unknown unit '" + unit + "'");
  return outcomes_.row(ui).transpose();
}

bool PanelDataset::has_covariate(const std::string& name) const {
  return std::find(covariate_names_.begin(), covariate_names_.end(), name) !=
         covariate_names_.end();
}

const Eigen::MatrixXd& PanelDataset::covariate_series(const std::string& name) const {
  auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end())
    raise(ErrorClass::InvalidArgument, "unknown covariate '" + name + "'");
  return covariate_series_[it - covariate_names_.begin()];
}

void PanelDataset::add_covariate(const std::string& name, Eigen::MatrixXd series) {
  if (has_covariate(name))
    raise(ErrorClass::InvalidArgument, "duplicate covariate '" + name + "'");
  if (series.rows() != n_units() || series.cols() != n_periods())
    raise(ErrorClass::DimensionMismatch,
          "covariate '" + name + "' has shape " + std::to_string(series.rows()) +
              "x" + std::to_string(series.cols()) + ", panel is " +
              std::to_string(n_units()) + "x" + std::to_string(n_periods()));
  covariate_names_.push_back(name);
  covariate_series_.push_back(std::move(series));
}

Eigen::VectorXd PanelDataset::aggregate_covariate(const std::string& name,
                                                  int year_lo, int year_hi) const {
  const Eigen::MatrixXd& series = covariate_series(name);
  Eigen::VectorXd out(n_units());
  for (int u = 0; u < n_units(); ++u) {
    double sum = 0.0;
    int count = 0;
    for (int p = 0; p < n_periods(); ++p) {
      int year = periods_[p];
      if (year < year_lo || year > year_hi) continue;
      double v = series(u, p);
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    out[u] = count > 0 ? sum / count : kNaN;
  }
  return out;
}

void PanelDataset::set_conflicts(const std::string& unit,
                                 std::vector<ConflictEpisode> episodes) {
  if (unit_index(unit) < 0)
    raise(ErrorClass::InvalidArgument, "unknown unit '" + unit + "'");
  conflicts_[unit] = std::move(episodes);
}

void PanelDataset::validate() const {
  if (units_.size() < 2)
    raise(ErrorClass::InvalidArgument, "panel needs at least 2 units");
  if (periods_.size() < 3)
    raise(ErrorClass::InvalidArgument, "panel needs at least 3 periods");
  std::unordered_set<std::string> seen;
  for (const auto& u : units_) {
    if (!seen.insert(u).second)
      raise(ErrorClass::DuplicateCell, "duplicate unit id '" + u + "'");
  }
  for (std::size_t i = 1; i < periods_.size(); ++i) {
    if (periods_[i] != periods_[i - 1] + 1)
      raise(ErrorClass::InvalidArgument, "periods must increase in steps of 1");
  }
  if (outcomes_.rows() != n_units() || outcomes_.cols() != n_periods())
    raise(ErrorClass::DimensionMismatch, "outcome matrix shape mismatch");
  for (int u = 0; u < n_units(); ++u) {
    for (int p = 0; p < n_periods(); ++p) {
      if (!std::isfinite(outcomes_(u, p)))
        raise(ErrorClass::UnbalancedPanel,
              "non-finite outcome for (" + units_[u] + ", " +
                  std::to_string(periods_[p]) + ")");
    }
  }
  for (const auto& [unit, episodes] : conflicts_) {
    if (std::find(units_.begin(), units_.end(), unit) == units_.end())
      raise(ErrorClass::InvalidArgument,
            "conflict episodes for unknown unit '" + unit + "'");
    for (const auto& e : episodes) {
      if (e.start_year > e.end_year)
        raise(ErrorClass::InvalidArgument,
              "conflict interval with start > end for '" + unit + "'");
      if (!overlaps(e, periods_.front(), periods_.back()))
        raise(ErrorClass::InvalidArgument,
              "conflict interval outside panel range for '" + unit + "'");
    }
  }
}

namespace {

struct RawCell {
  double outcome;
  std::vector<double> covariates;  // NaN = missing
};

}  // namespace

PanelDataset load_panel(std::istream& in, const PanelSchema& schema) {
  CsvReader reader(in);
  CsvRow row;
  if (!reader.next(row))
    raise(ErrorClass::MalformedRow, "line 1: empty input, header expected");

  int unit_col = -1, year_col = -1, outcome_col = -1;
  std::vector<std::pair<std::string, int>> covariate_cols;
  for (std::size_t i = 0; i < row.fields.size(); ++i) {
    const std::string& name = row.fields[i];
    if (name == schema.unit_column) unit_col = static_cast<int>(i);
    else if (name == schema.year_column) year_col = static_cast<int>(i);
    else if (name == schema.outcome_column) outcome_col = static_cast<int>(i);
    else covariate_cols.emplace_back(name, static_cast<int>(i));
  }
  if (unit_col < 0 || year_col < 0 || outcome_col < 0)
    raise(ErrorClass::MalformedRow,
          "line 1: header must contain columns '" + schema.unit_column + "', '" +
              schema.year_column + "', '" + schema.outcome_column + "'");

  std::size_t width = row.fields.size();
  std::vector<std::string> units;
  std::unordered_map<std::string, int> unit_ids;
  std::map<std::pair<int, int>, RawCell> cells;  // (unit id, year)
  int year_min = std::numeric_limits<int>::max();
  int year_max = std::numeric_limits<int>::min();
  std::vector<std::pair<std::string, int>> missing_outcomes;  // (unit, year)

  while (reader.next(row)) {
    if (row.fields.size() != width)
      raise(ErrorClass::MalformedRow,
            "line " + std::to_string(row.line_no) + ": expected " +
                std::to_string(width) + " fields, got " +
                std::to_string(row.fields.size()));
    const std::string& unit = row.fields[unit_col];
    if (unit.empty())
      raise(ErrorClass::MalformedRow,
            "line " + std::to_string(row.line_no) + ": empty unit id");
    auto year = parse_int(row.fields[year_col]);
    if (!year)
      raise(ErrorClass::NonNumericValue,
            "line " + std::to_string(row.line_no) + ": year '" +
                row.fields[year_col] + "' is not an integer");
    auto [it, inserted] = unit_ids.emplace(unit, static_cast<int>(units.size()));
    if (inserted) units.push_back(unit);
    int uid = it->second;
    int y = static_cast<int>(*year);
    if (cells.count({uid, y}))
      raise(ErrorClass::DuplicateCell,
            "line " + std::to_string(row.line_no) + ": duplicate cell (" + unit +
                ", " + std::to_string(y) + ")");
    RawCell cell;
    const std::string& outcome_text = row.fields[outcome_col];
    if (outcome_text.empty()) {
      missing_outcomes.emplace_back(unit, y);
      cell.outcome = kNaN;
    } else {
      auto v = parse_double(outcome_text);
      if (!v)
        raise(ErrorClass::NonNumericValue,
              "line " + std::to_string(row.line_no) + ": outcome '" +
                  outcome_text + "' is not numeric");
      cell.outcome = *v;
      if (!std::isfinite(*v))
        raise(ErrorClass::NonNumericValue,
              "line " + std::to_string(row.line_no) + ": outcome is not finite");
    }
    cell.covariates.reserve(covariate_cols.size());
    for (const auto& [cname, ci] : covariate_cols) {
      const std::string& text = row.fields[ci];
      if (text.empty()) {
        cell.covariates.push_back(kNaN);
      } else {
        auto v = parse_double(text);
        if (!v)
          raise(ErrorClass::NonNumericValue,
                "line " + std::to_string(row.line_no) + ": covariate '" + cname +
                    "' value '" + text + "' is not numeric");
        cell.covariates.push_back(*v);
      }
    }
    cells[{uid, y}] = std::move(cell);
    year_min = std::min(year_min, y);
    year_max = std::max(year_max, y);
  }

  if (cells.empty()) raise(ErrorClass::EmptyInput, "panel has no data rows");

  // Balance check over the full [year_min, year_max] range.
  for (int u = 0; u < static_cast<int>(units.size()); ++u) {
    for (int y = year_min; y <= year_max; ++y) {
      if (!cells.count({u, y})) missing_outcomes.emplace_back(units[u], y);
    }
  }
  if (!missing_outcomes.empty()) {
    std::sort(missing_outcomes.begin(), missing_outcomes.end());
    std::ostringstream msg;
    msg << "missing outcome cells:";
    std::size_t shown = std::min<std::size_t>(missing_outcomes.size(), 10);
    for (std::size_t i = 0; i < shown; ++i)
      msg << " (" << missing_outcomes[i].first << ", "
          << missing_outcomes[i].second << ")";
    if (missing_outcomes.size() > shown)
      msg << " and " << missing_outcomes.size() - shown << " more";
    raise(ErrorClass::UnbalancedPanel, msg.str());
  }

  int n_units = static_cast<int>(units.size());
  int n_periods = year_max - year_min + 1;
  std::vector<int> periods(n_periods);
  for (int p = 0; p < n_periods; ++p) periods[p] = year_min + p;

  Eigen::MatrixXd outcomes(n_units, n_periods);
  std::vector<Eigen::MatrixXd> cov_series(
      covariate_cols.size(), Eigen::MatrixXd::Constant(n_units, n_periods, kNaN));
  for (int u = 0; u < n_units; ++u) {
    for (int p = 0; p < n_periods; ++p) {
      const RawCell& cell = cells.at({u, year_min + p});
      outcomes(u, p) = cell.outcome;
      for (std::size_t c = 0; c < covariate_cols.size(); ++c)
        cov_series[c](u, p) = cell.covariates[c];
    }
  }

  PanelDataset panel(std::move(units), std::move(periods), std::move(outcomes),
                     schema.outcome_column);
  for (std::size_t c = 0; c < covariate_cols.size(); ++c)
    panel.add_covariate(covariate_cols[c].first, std::move(cov_series[c]));
  return panel;
}

PanelDataset load_panel_file(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) raise(ErrorClass::Io, "cannot open '" + path + "'");
  return load_panel(in, schema);
}

ConflictLoadResult load_conflicts(std::istream& in, PanelDataset& panel) {
  CsvReader reader(in);
  CsvRow row;
  if (!reader.next(row))
    raise(ErrorClass::MalformedRow, "line 1: empty input, header expected");
  if (row.fields.size() != 3 || row.fields[0] != "unit" ||
      row.fields[1] != "start_year" || row.fields[2] != "end_year")
    raise(ErrorClass::MalformedRow,
          "line 1: conflict header must be 'unit,start_year,end_year'");

  ConflictLoadResult result;
  std::map<std::string, std::vector<ConflictEpisode>> staged;
  std::set<std::string> unknown;
  while (reader.next(row)) {
    if (row.fields.size() != 3)
      raise(ErrorClass::MalformedRow,
            "line " + std::to_string(row.line_no) + ": expected 3 fields");
    auto start = parse_int(row.fields[1]);
    auto end = parse_int(row.fields[2]);
    if (!start || !end)
      raise(ErrorClass::NonNumericValue,
            "line " + std::to_string(row.line_no) + ": years must be integers");
    if (*start > *end)
      raise(ErrorClass::MalformedRow,
            "line " + std::to_string(row.line_no) + ": start_year > end_year");
    const std::string& unit = row.fields[0];
    if (panel.unit_index(unit) < 0) {
      unknown.insert(unit);
      continue;
    }
    ConflictEpisode e{static_cast<int>(*start), static_cast<int>(*end)};
    if (!overlaps(e, panel.first_year(), panel.last_year())) {
      ++result.dropped_out_of_range;
      continue;
    }
    staged[unit].push_back(e);
  }
  for (auto& [unit, episodes] : staged) panel.set_conflicts(unit, std::move(episodes));
  result.episodes = panel.conflicts();
  result.unknown_units.assign(unknown.begin(), unknown.end());
  return result;
}

ConflictLoadResult load_conflicts_file(const std::string& path, PanelDataset& panel) {
  std::ifstream in(path);
  if (!in) raise(ErrorClass::Io, "cannot open '" + path + "'");
  return load_conflicts(in, panel);
}

void write_panel(const PanelDataset& panel, std::ostream& out,
                 const PanelSchema& schema) {
  out << schema.unit_column << ',' << schema.year_column << ','
      << schema.outcome_column;
  for (const auto& name : panel.covariate_names()) out << ',' << name;
  out << '\n';
  for (int u = 0; u < panel.n_units(); ++u) {
    for (int p = 0; p < panel.n_periods(); ++p) {
      out << panel.units()[u] << ',' << panel.periods()[p] << ','
          << format_double(panel.outcomes()(u, p));
      for (const auto& name : panel.covariate_names()) {
        double v = panel.covariate_series(name)(u, p);
        out << ',';
        if (!std::isnan(v)) out << format_double(v);
      }
      out << '\n';
    }
  }
}

void write_panel_file(const PanelDataset& panel, const std::string& path,
                      const PanelSchema& schema) {
  std::ofstream out(path);
  if (!out) raise(ErrorClass::Io, "cannot open '" + path + "' for writing");
  write_panel(panel, out, schema);
  if (!out.good()) raise(ErrorClass::Io, "failed writing '" + path + "'");
}

PanelDataset filter_donors(const PanelDataset& panel, const ExclusionRules& rules,
                           const std::string& treated_unit) {
  int treated_idx = panel.unit_index(treated_unit);
  if (treated_idx < 0)
    raise(ErrorClass::InvalidArgument,
          "treated unit '" + treated_unit + "' not in panel");
  for (const auto& d : rules.drop_units) {
    if (!rules.keep_units.empty() &&
        std::find(rules.keep_units.begin(), rules.keep_units.end(), d) !=
            rules.keep_units.end())
      raise(ErrorClass::InvalidArgument,
            "unit '" + d + "' appears in both drop_units and keep_units");
  }
  if (std::find(rules.drop_units.begin(), rules.drop_units.end(), treated_unit) !=
      rules.drop_units.end())
    raise(ErrorClass::TreatedUnitExcluded,
          "drop_units names the treated unit '" + treated_unit + "'");
  if (!rules.keep_units.empty() &&
      std::find(rules.keep_units.begin(), rules.keep_units.end(), treated_unit) ==
          rules.keep_units.end())
    raise(ErrorClass::TreatedUnitExcluded,
          "keep_units omits the treated unit '" + treated_unit + "'");

  std::vector<int> kept;
  for (int u = 0; u < panel.n_units(); ++u) {
    const std::string& name = panel.units()[u];
    if (u == treated_idx) {
      kept.push_back(u);
      continue;
    }
    if (rules.drop_conflict_window) {
      auto [lo, hi] = *rules.drop_conflict_window;
      auto it = panel.conflicts().find(name);
      if (it != panel.conflicts().end()) {
        bool hit = false;
        for (const auto& e : it->second)
          if (overlaps(e, lo, hi)) { hit = true; break; }
        if (hit) continue;
      }
    }
    if (std::find(rules.drop_units.begin(), rules.drop_units.end(), name) !=
        rules.drop_units.end())
      continue;
    if (!rules.keep_units.empty() &&
        std::find(rules.keep_units.begin(), rules.keep_units.end(), name) ==
            rules.keep_units.end())
      continue;
    kept.push_back(u);
  }
  if (kept.size() < 2)
    raise(ErrorClass::EmptyDonorPool, "no donors left after exclusions");

  std::vector<std::string> units;
  units.reserve(kept.size());
  Eigen::MatrixXd outcomes(kept.size(), panel.n_periods());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    units.push_back(panel.units()[kept[i]]);
    outcomes.row(i) = panel.outcomes().row(kept[i]);
  }
  PanelDataset out(std::move(units), panel.periods(), std::move(outcomes),
                   panel.outcome_label());
  for (const auto& name : panel.covariate_names()) {
    const Eigen::MatrixXd& src = panel.covariate_series(name);
    Eigen::MatrixXd series(kept.size(), panel.n_periods());
    for (std::size_t i = 0; i < kept.size(); ++i) series.row(i) = src.row(kept[i]);
    out.add_covariate(name, std::move(series));
  }
  for (const auto& u : out.units()) {
    auto it = panel.conflicts().find(u);
    if (it != panel.conflicts().end()) out.set_conflicts(u, it->second);
  }
  return out;
}

PanelDataset restrict_window(const PanelDataset& panel, int start_year, int end_year) {
  if (start_year > end_year)
    raise(ErrorClass::InvalidArgument, "window start exceeds window end");
  int lo = std::max(start_year, panel.first_year());
  int hi = std::min(end_year, panel.last_year());
  if (lo > hi)
    raise(ErrorClass::EmptyWindow,
          "window [" + std::to_string(start_year) + ", " +
              std::to_string(end_year) + "] does not intersect panel years [" +
              std::to_string(panel.first_year()) + ", " +
              std::to_string(panel.last_year()) + "]");
  int p0 = panel.period_index(lo);
  int count = hi - lo + 1;
  if (count < 3)
    raise(ErrorClass::EmptyWindow, "window keeps fewer than 3 periods");

  std::vector<int> periods(panel.periods().begin() + p0,
                           panel.periods().begin() + p0 + count);
  Eigen::MatrixXd outcomes = panel.outcomes().middleCols(p0, count);
  PanelDataset out(panel.units(), std::move(periods), std::move(outcomes),
                   panel.outcome_label());
  for (const auto& name : panel.covariate_names())
    out.add_covariate(name, panel.covariate_series(name).middleCols(p0, count));
  for (const auto& [unit, episodes] : panel.conflicts()) {
    std::vector<ConflictEpisode> kept;
    for (const auto& e : episodes)
      if (overlaps(e, lo, hi)) kept.push_back(e);
    if (!kept.empty()) out.set_conflicts(unit, std::move(kept));
  }
  return out;
}

}  // namespace synthctl
