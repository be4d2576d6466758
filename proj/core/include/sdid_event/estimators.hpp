#pragma once

#include <vector>

#include "sdid_event/panel.hpp"
#include "sdid_event/weights.hpp"

namespace sdid {

// Point estimates for one cohort. dynamic[l-1] is the effect l periods
// after adoption (l = 1 is the adoption period itself); placebo[p] is the
// pre-treatment contrast at event time -p, p = 0 .. #pre-periods-1.
struct CohortEstimate {
  int cohort = 0;  // adoption period, time label space
  double tau = 0.0;
  std::vector<double> dynamic;
  std::vector<double> placebo;
  WeightSet weights;
};

struct EventEstimate {
  int ell = 0;
  double tau = 0.0;
  int n_tr = 0;  // units in cohorts reaching this event time
};

struct EstimationResult {
  double att = 0.0;
  std::vector<EventEstimate> event;    // ell = 1 .. t_tr
  std::vector<EventEstimate> placebo;  // ell = 0, -1, ... (same weighting rule)
  std::vector<CohortEstimate> cohorts;
  CohortStructure structure;
};

// lambda-weighted pre-treatment gap between the cohort's treated mean and
// its synthetic control; the baseline subtracted by every dynamic effect.
double pre_gap(const PanelDataset& subpanel, const WeightSet& weights);

// Dynamic effect at event time ell >= 1 for one cohort.
double tau_cohort_ell(const PanelDataset& subpanel, const WeightSet& weights,
                      int ell);

// Cohort effect: post-period average gap minus the pre-treatment gap.
// Equals the mean of tau_cohort_ell over the cohort's horizon.
double tau_cohort(const PanelDataset& subpanel, const WeightSet& weights);

// Pre-treatment contrasts at event times 0, -1, ..., -(#pre-1), same
// centering as the dynamic effects. Their lambda-weighted average is zero
// by construction.
std::vector<double> placebo_effects(const PanelDataset& subpanel,
                                    const WeightSet& weights);

// Event-study aggregation across cohorts, weighted by cohort size.
double tau_ell(const std::vector<CohortEstimate>& cohorts,
               const CohortStructure& structure, int ell);

// Overall effect: cohort effects weighted by their share of treated
// unit-periods. Identical to the event-study aggregation of tau_ell.
double att(const std::vector<CohortEstimate>& cohorts,
           const CohortStructure& structure);

struct EstimationOptions {
  SolverOptions solver;
  bool uniform_weights = false;  // skip the solver, flat omega and lambda
};

// Full pipeline: cohort bookkeeping, per-cohort weights and effects,
// event-study aggregation, overall effect.
EstimationResult estimate(const PanelDataset& panel,
                          const EstimationOptions& options = {});

}  // namespace sdid
