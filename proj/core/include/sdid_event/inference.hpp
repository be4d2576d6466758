#pragma once

#include <cstdint>
#include <map>
#include <utility>

#include "sdid_event/estimators.hpp"

namespace sdid {

enum class VarianceMethod { none, bootstrap, placebo };

// Resampling standard errors for the overall effect and every event-study
// row (dynamic effects, keys >= 1, and aggregated placebos, keys <= 0).
// Replications are keyed by (seed, replication index), so the result is
// identical for any thread count. A target can be missing from a bootstrap
// replication when the redrawn panel has no cohort reaching that horizon;
// its standard deviation is then taken over the replications that do, and
// valid_reps_by_ell records how many that was.
struct VarianceResult {
  VarianceMethod method = VarianceMethod::none;
  int reps = 0;
  std::uint64_t seed = 0;
  double se_att = 0.0;
  std::map<int, double> se_by_ell;
  std::map<int, int> valid_reps_by_ell;
  double ci_level = 0.95;
  int failed_reps = 0;
};

// Clustered bootstrap over units: each replication draws N units with
// replacement (duplicates become distinct units), redraws while the sample
// lacks a treated or a control unit, and re-runs the full estimator.
VarianceResult bootstrap_se(const PanelDataset& panel,
                            const EstimationOptions& options, int reps,
                            std::uint64_t seed, int threads = 1);

// Placebo variance: each replication picks N_tr of the controls without
// replacement, gives them the true cohort structure, and estimates on the
// controls-only panel. Requires more controls than treated units.
VarianceResult placebo_se(const PanelDataset& panel,
                          const EstimationOptions& options, int reps,
                          std::uint64_t seed, int threads = 1);

// Normal-quantile interval: estimate +- z_{(1+level)/2} * se.
std::pair<double, double> confidence_interval(double estimate, double se,
                                              double level);

}  // namespace sdid
