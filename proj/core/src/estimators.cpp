#include "sdid_event/estimators.hpp"

#include <algorithm>

#include "sdid_event/errors.hpp"

namespace sdid {

namespace {

// Treated-mean-minus-synthetic gap at one period.
double gap_at(const PanelDataset& subpanel, const WeightSet& weights, int col) {
  const double synthetic =
      weights.omega.dot(subpanel.outcome().col(col).head(subpanel.n_controls()));
  return subpanel.treated_mean(col) - synthetic;
}

}  // namespace

double pre_gap(const PanelDataset& subpanel, const WeightSet& weights) {
  const int a = subpanel_adoption_col(subpanel);
  double value = 0.0;
  for (int c = 0; c < a; ++c) value += weights.lambda[c] * gap_at(subpanel, weights, c);
  return value;
}

double tau_cohort_ell(const PanelDataset& subpanel, const WeightSet& weights,
                      int ell) {
  const int a = subpanel_adoption_col(subpanel);
  const int horizon = subpanel.n_periods() - a;
  if (ell < 1 || ell > horizon) throw HorizonOutOfRange(ell, horizon);
  return gap_at(subpanel, weights, a + ell - 1) - pre_gap(subpanel, weights);
}

double tau_cohort(const PanelDataset& subpanel, const WeightSet& weights) {
  const int a = subpanel_adoption_col(subpanel);
  const int t = subpanel.n_periods();
  double post = 0.0;
  for (int c = a; c < t; ++c) post += gap_at(subpanel, weights, c);
  return post / (t - a) - pre_gap(subpanel, weights);
}

std::vector<double> placebo_effects(const PanelDataset& subpanel,
                                    const WeightSet& weights) {
  const int a = subpanel_adoption_col(subpanel);
  const double baseline = pre_gap(subpanel, weights);
  std::vector<double> out(a);
  // placebo p sits at event time -p, i.e. period column a-1-p.
  for (int p = 0; p < a; ++p)
    out[p] = gap_at(subpanel, weights, a - 1 - p) - baseline;
  return out;
}

double tau_ell(const std::vector<CohortEstimate>& cohorts,
               const CohortStructure& structure, int ell) {
  if (ell < 1 || ell > structure.t_tr) throw HorizonOutOfRange(ell, structure.t_tr);
  double value = 0.0;
  const int n_ell = structure.n_tr_by_ell[ell - 1];
  for (int k : structure.effective_cohorts[ell - 1]) {
    const Cohort& c = structure.cohorts[k];
    value += static_cast<double>(c.n_tr) / n_ell * cohorts[k].dynamic[ell - 1];
  }
  return value;
}

double att(const std::vector<CohortEstimate>& cohorts,
           const CohortStructure& structure) {
  double value = 0.0;
  for (std::size_t k = 0; k < structure.cohorts.size(); ++k) {
    const Cohort& c = structure.cohorts[k];
    value += static_cast<double>(c.t_post) / structure.t_post * cohorts[k].tau;
  }
  return value;
}

EstimationResult estimate(const PanelDataset& panel,
                          const EstimationOptions& options) {
  EstimationResult result;
  result.structure = derive_cohorts(panel);

  for (const Cohort& c : result.structure.cohorts) {
    const PanelDataset sub = cohort_subpanel(panel, result.structure, c.label);

    CohortEstimate est;
    est.cohort = c.label;
    try {
      est.weights = solve_cohort_weights(sub, options.solver, options.uniform_weights);
      est.tau = tau_cohort(sub, est.weights);
      est.dynamic.resize(c.horizon);
      for (int ell = 1; ell <= c.horizon; ++ell)
        est.dynamic[ell - 1] = tau_cohort_ell(sub, est.weights, ell);
      est.placebo = placebo_effects(sub, est.weights);
    } catch (const Error& e) {
      throw Error("cohort " + std::to_string(c.label) + ": " + e.what());
    }
    result.cohorts.push_back(std::move(est));
  }

  for (int ell = 1; ell <= result.structure.t_tr; ++ell)
    result.event.push_back({ell, tau_ell(result.cohorts, result.structure, ell),
                            result.structure.n_tr_by_ell[ell - 1]});

  // Placebos aggregate exactly like the event-study effects, over cohorts
  // deep enough to reach the given pre-treatment offset.
  int max_depth = 0;
  for (const Cohort& c : result.structure.cohorts)
    max_depth = std::max(max_depth, c.col);
  for (int p = 0; p < max_depth; ++p) {
    double value = 0.0;
    int n_tr = 0;
    for (std::size_t k = 0; k < result.structure.cohorts.size(); ++k)
      if (result.structure.cohorts[k].col > p) n_tr += result.structure.cohorts[k].n_tr;
    for (std::size_t k = 0; k < result.structure.cohorts.size(); ++k) {
      const Cohort& c = result.structure.cohorts[k];
      if (c.col > p)
        value += static_cast<double>(c.n_tr) / n_tr * result.cohorts[k].placebo[p];
    }
    result.placebo.push_back({-p, value, n_tr});
  }

  result.att = att(result.cohorts, result.structure);
  return result;
}

}  // namespace sdid
