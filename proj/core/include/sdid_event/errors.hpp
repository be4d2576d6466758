#pragma once

#include <stdexcept>
#include <string>

namespace sdid {

// Base class for everything this library throws on bad input or bad data.
// Solver non-convergence is not an exception: it is reported through
// SolverDiagnostics::converged so callers still get the best iterate.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- panel ingestion / validation ---------------------------------------

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& detail)
      : Error("row " + std::to_string(row) + ": " + detail), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class MissingCell : public Error {
 public:
  MissingCell(std::string unit, int time)
      : Error("unbalanced panel: missing observation for unit '" + unit +
              "' at period " + std::to_string(time)),
        unit_(std::move(unit)),
        time_(time) {}
  const std::string& unit() const { return unit_; }
  int time() const { return time_; }

 private:
  std::string unit_;
  int time_;
};

class NonAbsorbingTreatment : public Error {
 public:
  explicit NonAbsorbingTreatment(std::string unit)
      : Error("treatment switches off for unit '" + unit + "'"),
        unit_(std::move(unit)) {}
  const std::string& unit() const { return unit_; }

 private:
  std::string unit_;
};

class TreatedFromFirstPeriod : public Error {
 public:
  explicit TreatedFromFirstPeriod(std::string unit)
      : Error("unit '" + unit + "' is treated from the first period (no pre-period)"),
        unit_(std::move(unit)) {}
  const std::string& unit() const { return unit_; }

 private:
  std::string unit_;
};

class NoControls : public Error {
 public:
  NoControls() : Error("panel has no never-treated unit") {}
};

class NoTreated : public Error {
 public:
  NoTreated() : Error("panel has no treated unit") {}
};

class NonConsecutivePeriods : public Error {
 public:
  NonConsecutivePeriods(int before, int after)
      : Error("time labels must be consecutive integers, found gap between " +
              std::to_string(before) + " and " + std::to_string(after)) {}
};

class UnknownCohort : public Error {
 public:
  explicit UnknownCohort(int adoption)
      : Error("no cohort adopts at period " + std::to_string(adoption)) {}
};

// --- solver --------------------------------------------------------------

class DegenerateProblem : public Error {
 public:
  explicit DegenerateProblem(const std::string& detail)
      : Error("degenerate weight problem: " + detail) {}
};

// --- estimators ----------------------------------------------------------

class HorizonOutOfRange : public Error {
 public:
  HorizonOutOfRange(int ell, int max_ell)
      : Error("event time " + std::to_string(ell) + " outside 1.." +
              std::to_string(max_ell)) {}
};

// --- inference -----------------------------------------------------------

class DegeneratePanel : public Error {
 public:
  explicit DegeneratePanel(const std::string& detail)
      : Error("degenerate panel for resampling: " + detail) {}
};

class TooManyFailedDraws : public Error {
 public:
  TooManyFailedDraws()
      : Error("bootstrap redraw budget exhausted (every draw lost the treated "
              "or the control group)") {}
};

class InsufficientControls : public Error {
 public:
  InsufficientControls(int n_co, int n_tr)
      : Error("placebo variance needs more controls than treated units, have " +
              std::to_string(n_co) + " controls for " + std::to_string(n_tr) +
              " treated") {}
};

// --- dgp -----------------------------------------------------------------

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& detail)
      : Error("invalid generator spec: " + detail) {}
};

}  // namespace sdid
