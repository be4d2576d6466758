#include "sdid_event/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "sdid_event/errors.hpp"

namespace sdid {

namespace {

// Splits one CSV record. Handles double-quoted fields with "" escapes;
// anything fancier (embedded newlines) is out of scope for long-format
// panel data.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& field, std::size_t row, const char* what) {
  const std::string t = trim(field);
  int value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ParseError(row, std::string("cannot parse ") + what + " '" + field + "' as integer");
  return value;
}

double parse_double(const std::string& field, std::size_t row, const char* what) {
  const std::string t = trim(field);
  try {
    std::size_t pos = 0;
    const double value = std::stod(t, &pos);
    if (pos != t.size() || !std::isfinite(value)) throw std::invalid_argument(t);
    return value;
  } catch (const std::exception&) {
    throw ParseError(row, std::string("cannot parse ") + what + " '" + field + "' as number");
  }
}

struct Row {
  std::string unit;
  int time;
  double outcome;
  int treatment;
  std::size_t file_row;
};

}  // namespace

PanelDataset PanelDataset::build(std::vector<std::string> unit_labels,
                                 std::vector<int> time_labels,
                                 Eigen::MatrixXd outcome,
                                 Eigen::MatrixXi treatment) {
  const int n = static_cast<int>(unit_labels.size());
  const int t = static_cast<int>(time_labels.size());
  if (outcome.rows() != n || outcome.cols() != t || treatment.rows() != n ||
      treatment.cols() != t)
    throw Error("panel matrices do not match label dimensions");
  if (n == 0 || t == 0) throw Error("empty panel");

  for (int c = 1; c < t; ++c)
    if (time_labels[c] != time_labels[c - 1] + 1)
      throw NonConsecutivePeriods(time_labels[c - 1], time_labels[c]);

  // Adoption column per unit; -1 marks never-treated. Treatment must be
  // 0/1, absorbing, and leave at least one pre-period.
  std::vector<int> adoption(n, -1);
  for (int i = 0; i < n; ++i) {
    int first_on = -1;
    for (int c = 0; c < t; ++c) {
      const int d = treatment(i, c);
      if (d != 0 && d != 1) throw Error("treatment for unit '" + unit_labels[i] + "' is not 0/1");
      if (d == 1 && first_on < 0) first_on = c;
      if (d == 0 && first_on >= 0) throw NonAbsorbingTreatment(unit_labels[i]);
    }
    if (first_on == 0) throw TreatedFromFirstPeriod(unit_labels[i]);
    adoption[i] = first_on;
  }

  const int n_controls =
      static_cast<int>(std::count(adoption.begin(), adoption.end(), -1));
  if (n_controls == 0) throw NoControls();
  if (n_controls == n) throw NoTreated();

  // Stable reorder: controls first, treated after, preserving incoming order.
  std::vector<int> order;
  order.reserve(n);
  for (int i = 0; i < n; ++i)
    if (adoption[i] < 0) order.push_back(i);
  for (int i = 0; i < n; ++i)
    if (adoption[i] >= 0) order.push_back(i);

  PanelDataset panel;
  panel.time_labels_ = std::move(time_labels);
  panel.unit_labels_.resize(n);
  panel.adoption_col_.resize(n);
  panel.outcome_.resize(n, t);
  panel.treatment_.resize(n, t);
  for (int r = 0; r < n; ++r) {
    const int src = order[r];
    panel.unit_labels_[r] = std::move(unit_labels[src]);
    panel.adoption_col_[r] = adoption[src];
    panel.outcome_.row(r) = outcome.row(src);
    panel.treatment_.row(r) = treatment.row(src);
  }
  panel.n_controls_ = n_controls;
  return panel;
}

double PanelDataset::treated_mean(int col) const {
  return outcome_.col(col).tail(n_treated()).mean();
}

PanelDataset load_panel(std::istream& in, const CsvColumns& columns) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);  // UTF-8 BOM
  const std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (trim(header[j]) == name) return static_cast<int>(j);
    throw ParseError(1, "column '" + name + "' not found in header");
  };
  const int unit_col = column_index(columns.unit);
  const int time_col = column_index(columns.time);
  const int outcome_col = column_index(columns.outcome);
  const int treatment_col = column_index(columns.treatment);

  std::vector<Row> rows;
  std::size_t file_row = 1;
  while (std::getline(in, line)) {
    ++file_row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    const int needed = std::max(std::max(unit_col, time_col),
                                std::max(outcome_col, treatment_col));
    if (static_cast<int>(fields.size()) <= needed)
      throw ParseError(file_row, "expected at least " + std::to_string(needed + 1) +
                                     " fields, found " + std::to_string(fields.size()));
    Row row;
    row.unit = trim(fields[unit_col]);
    if (row.unit.empty()) throw ParseError(file_row, "empty unit label");
    row.time = parse_int(fields[time_col], file_row, "time");
    row.outcome = parse_double(fields[outcome_col], file_row, "outcome");
    const int d = parse_int(fields[treatment_col], file_row, "treatment");
    if (d != 0 && d != 1)
      throw ParseError(file_row, "treatment must be 0 or 1, found " + std::to_string(d));
    row.treatment = d;
    row.file_row = file_row;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(file_row, "no data rows");

  // Canonical order: unit label (bytewise), then time. This makes every
  // downstream result independent of the file's physical row order.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.unit != b.unit) return a.unit < b.unit;
    return a.time < b.time;
  });

  std::vector<int> times;
  for (const Row& r : rows) times.push_back(r.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const int t = static_cast<int>(times.size());

  std::map<int, int> time_index;
  for (int c = 0; c < t; ++c) time_index[times[c]] = c;

  std::vector<std::string> units;
  for (const Row& r : rows)
    if (units.empty() || units.back() != r.unit) units.push_back(r.unit);
  const int n = static_cast<int>(units.size());

  Eigen::MatrixXd outcome(n, t);
  Eigen::MatrixXi treatment(n, t);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(n, t);
  seen.setConstant(false);

  int u = -1;
  for (const Row& r : rows) {
    if (u < 0 || units[u] != r.unit) ++u;
    const int c = time_index.at(r.time);
    if (seen(u, c))
      throw ParseError(r.file_row, "duplicate observation for unit '" + r.unit +
                                       "' at period " + std::to_string(r.time));
    seen(u, c) = true;
    outcome(u, c) = r.outcome;
    treatment(u, c) = r.treatment;
  }
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < t; ++c)
      if (!seen(i, c)) throw MissingCell(units[i], times[c]);

  return PanelDataset::build(std::move(units), std::move(times),
                             std::move(outcome), std::move(treatment));
}

void write_panel_csv(const PanelDataset& panel, std::ostream& out,
                     const CsvColumns& columns) {
  out << columns.unit << ',' << columns.time << ',' << columns.outcome << ','
      << columns.treatment << '\n';
  char buf[64];
  for (int i = 0; i < panel.n_units(); ++i) {
    for (int c = 0; c < panel.n_periods(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", panel.outcome()(i, c));
      out << panel.unit_labels()[i] << ',' << panel.time_labels()[c] << ','
          << buf << ',' << panel.treatment()(i, c) << '\n';
    }
  }
}

const Cohort* CohortStructure::find(int adoption_label) const {
  for (const Cohort& c : cohorts)
    if (c.label == adoption_label) return &c;
  return nullptr;
}

CohortStructure derive_cohorts(const PanelDataset& panel) {
  CohortStructure s;
  for (int i = 0; i < panel.n_controls(); ++i) s.control_indices.push_back(i);

  std::map<int, std::vector<int>> by_col;
  for (int i = panel.n_controls(); i < panel.n_units(); ++i)
    by_col[panel.adoption_col(i)].push_back(i);

  const int t = panel.n_periods();
  for (const auto& [col, members] : by_col) {
    Cohort c;
    c.col = col;
    c.label = panel.time_labels()[col];
    c.members = members;
    c.n_tr = static_cast<int>(members.size());
    c.horizon = t - col;
    c.t_post = c.n_tr * c.horizon;
    s.t_post += c.t_post;
    s.t_tr = std::max(s.t_tr, c.horizon);
    s.cohorts.push_back(std::move(c));
  }

  // A cohort contributes to event time ell iff its horizon reaches ell.
  s.effective_cohorts.resize(s.t_tr);
  s.n_tr_by_ell.resize(s.t_tr, 0);
  for (int ell = 1; ell <= s.t_tr; ++ell) {
    for (std::size_t k = 0; k < s.cohorts.size(); ++k) {
      if (s.cohorts[k].horizon >= ell) {
        s.effective_cohorts[ell - 1].push_back(static_cast<int>(k));
        s.n_tr_by_ell[ell - 1] += s.cohorts[k].n_tr;
      }
    }
  }
  return s;
}

PanelDataset cohort_subpanel(const PanelDataset& panel,
                             const CohortStructure& cohorts,
                             int adoption_label) {
  const Cohort* cohort = cohorts.find(adoption_label);
  if (!cohort) throw UnknownCohort(adoption_label);

  std::vector<int> keep = cohorts.control_indices;
  keep.insert(keep.end(), cohort->members.begin(), cohort->members.end());

  const int n = static_cast<int>(keep.size());
  const int t = panel.n_periods();
  std::vector<std::string> labels(n);
  Eigen::MatrixXd outcome(n, t);
  Eigen::MatrixXi treatment(n, t);
  for (int r = 0; r < n; ++r) {
    labels[r] = panel.unit_labels()[keep[r]];
    outcome.row(r) = panel.outcome().row(keep[r]);
    treatment.row(r) = panel.treatment().row(keep[r]);
  }
  return PanelDataset::build(std::move(labels), panel.time_labels(),
                             std::move(outcome), std::move(treatment));
}

int subpanel_adoption_col(const PanelDataset& subpanel) {
  const int col = subpanel.adoption_col(subpanel.n_controls());
  for (int i = subpanel.n_controls() + 1; i < subpanel.n_units(); ++i)
    if (subpanel.adoption_col(i) != col)
      throw Error("subpanel mixes adoption periods; build it with cohort_subpanel");
  return col;
}

}  // namespace sdid
