#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace sdid {

// Balanced N x T panel. Row i is one unit, column c one period. Units are
// ordered never-treated first, then treated; periods are consecutive
// integers in ascending order. Treatment is binary and absorbing, every
// treated unit has at least one pre-period, and both groups are non-empty.
// Instances are immutable once built and safe to share across threads.
class PanelDataset {
 public:
  // Validates all invariants and reorders units so controls come first
  // (stable within each group). Throws a subclass of sdid::Error on any
  // violation.
  static PanelDataset build(std::vector<std::string> unit_labels,
                            std::vector<int> time_labels,
                            Eigen::MatrixXd outcome, Eigen::MatrixXi treatment);

  int n_units() const { return static_cast<int>(outcome_.rows()); }
  int n_periods() const { return static_cast<int>(outcome_.cols()); }
  int n_controls() const { return n_controls_; }
  int n_treated() const { return n_units() - n_controls_; }

  const std::vector<std::string>& unit_labels() const { return unit_labels_; }
  const std::vector<int>& time_labels() const { return time_labels_; }
  const Eigen::MatrixXd& outcome() const { return outcome_; }
  const Eigen::MatrixXi& treatment() const { return treatment_; }

  // First treated column for unit i, -1 if never treated.
  int adoption_col(int unit) const { return adoption_col_[unit]; }
  bool is_control(int unit) const { return adoption_col_[unit] < 0; }

  // Mean outcome over the treated block at one period.
  double treated_mean(int col) const;

 private:
  PanelDataset() = default;

  std::vector<std::string> unit_labels_;
  std::vector<int> time_labels_;
  Eigen::MatrixXd outcome_;
  Eigen::MatrixXi treatment_;
  std::vector<int> adoption_col_;
  int n_controls_ = 0;
};

// Column names used to pick fields out of a long-format CSV.
struct CsvColumns {
  std::string unit = "unit";
  std::string time = "time";
  std::string outcome = "outcome";
  std::string treatment = "treatment";
};

// Reads a long-format CSV (header row, comma delimiter, optional quoting)
// and assembles a validated PanelDataset. Rows are canonically sorted by
// (unit label, time) first, so the result does not depend on file row order.
PanelDataset load_panel(std::istream& in, const CsvColumns& columns = {});

// Writes the panel back out in the same long format load_panel reads.
void write_panel_csv(const PanelDataset& panel, std::ostream& out,
                     const CsvColumns& columns = {});

// One adoption cohort: all treated units that first switch on at the same
// period. `col` is the 0-based adoption column, `label` the matching time
// label, `horizon` the number of post periods (adoption included).
struct Cohort {
  int col = 0;
  int label = 0;
  std::vector<int> members;
  int n_tr = 0;
  int horizon = 0;
  int t_post = 0;  // n_tr * horizon
};

// Full cohort bookkeeping for a panel under staggered adoption.
struct CohortStructure {
  std::vector<Cohort> cohorts;          // sorted by adoption column
  std::vector<int> control_indices;     // 0 .. n_controls-1
  int t_post = 0;                       // sum of per-cohort t_post
  int t_tr = 0;                         // max horizon across cohorts
  std::vector<std::vector<int>> effective_cohorts;  // per ell-1: cohort ids
  std::vector<int> n_tr_by_ell;                     // per ell-1

  const Cohort* find(int adoption_label) const;
};

CohortStructure derive_cohorts(const PanelDataset& panel);

// Panel restricted to the never-treated units plus one cohort, all periods,
// controls first. `adoption_label` is the cohort's adoption period in time
// label space; throws UnknownCohort if no cohort adopts there.
PanelDataset cohort_subpanel(const PanelDataset& panel,
                             const CohortStructure& cohorts,
                             int adoption_label);

// Adoption column shared by every treated unit of a cohort subpanel.
int subpanel_adoption_col(const PanelDataset& subpanel);

}  // namespace sdid
