#include "sdid_event/dgp.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "sdid_event/errors.hpp"
#include "sdid_event/rng.hpp"

namespace sdid {

namespace {

void validate(const DGPSpec& spec) {
  if (spec.n_controls < 1) throw InvalidSpec("need at least one control unit");
  if (spec.cohorts.empty()) throw InvalidSpec("need at least one cohort");
  if (spec.n_periods < 2) throw InvalidSpec("need at least two periods");
  std::set<int> adoptions;
  int n_treated = 0;
  for (const DGPCohort& c : spec.cohorts) {
    if (c.size < 1) throw InvalidSpec("cohort size must be positive");
    if (c.adoption <= 1 || c.adoption > spec.n_periods)
      throw InvalidSpec("adoption period " + std::to_string(c.adoption) +
                        " outside (1, T]");
    if (!adoptions.insert(c.adoption).second)
      throw InvalidSpec("duplicate adoption period " + std::to_string(c.adoption));
    n_treated += c.size;
  }
  if (!(spec.sd_unit >= 0) || !(spec.sd_time >= 0) || !(spec.sd_noise >= 0))
    throw InvalidSpec("scales must be nonnegative");
  const int n = spec.n_controls + n_treated;
  if (!spec.factor_loadings.empty() &&
      static_cast<int>(spec.factor_loadings.size()) != n)
    throw InvalidSpec("factor_loadings must have one entry per unit");
  if (!spec.factor_values.empty() &&
      static_cast<int>(spec.factor_values.size()) != spec.n_periods)
    throw InvalidSpec("factor_values must have one entry per period");
  if (spec.factor_loadings.empty() != spec.factor_values.empty())
    throw InvalidSpec("factor_loadings and factor_values go together");
}

std::string unit_label(const char* prefix, int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%03d", prefix, k);
  return buf;
}

}  // namespace

GeneratedPanel generate(const DGPSpec& spec) {
  validate(spec);

  std::vector<DGPCohort> cohorts = spec.cohorts;
  std::sort(cohorts.begin(), cohorts.end(),
            [](const DGPCohort& a, const DGPCohort& b) { return a.adoption < b.adoption; });

  int n_treated = 0;
  for (const DGPCohort& c : cohorts) n_treated += c.size;
  const int n = spec.n_controls + n_treated;
  const int t = spec.n_periods;

  // Separate streams per component so draws stay aligned across spec
  // variations that share a seed.
  Rng unit_rng(spec.seed, 0);
  Rng time_rng(spec.seed, 1);
  Rng noise_rng(spec.seed, 2);

  std::vector<double> alpha(n), beta(t);
  for (double& v : alpha) v = spec.sd_unit * unit_rng.next_normal();
  for (double& v : beta) v = spec.sd_time * time_rng.next_normal();

  std::vector<std::string> labels(n);
  std::vector<int> adoption_col(n, -1);
  std::vector<std::vector<double>> delta_of(n);
  {
    int row = 0;
    for (int i = 0; i < spec.n_controls; ++i) labels[row++] = unit_label("C", i + 1);
    int treated_id = 0;
    for (const DGPCohort& c : cohorts) {
      std::vector<double> delta = c.delta;
      delta.resize(t - (c.adoption - 1), 0.0);  // pad to the cohort horizon
      for (int j = 0; j < c.size; ++j) {
        labels[row] = unit_label("T", ++treated_id);
        adoption_col[row] = c.adoption - 1;
        delta_of[row] = delta;
        ++row;
      }
    }
  }

  Eigen::MatrixXd outcome(n, t);
  Eigen::MatrixXi treatment(n, t);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < t; ++c) {
      const bool treated = adoption_col[i] >= 0 && c >= adoption_col[i];
      double y = alpha[i] + beta[c];
      if (!spec.factor_loadings.empty())
        y += spec.factor_loadings[i] * spec.factor_values[c];
      if (treated) y += delta_of[i][c - adoption_col[i]];
      y += spec.sd_noise * noise_rng.next_normal();
      outcome(i, c) = y;
      treatment(i, c) = treated ? 1 : 0;
    }
  }

  GeneratedPanel out{PanelDataset::build(std::move(labels),
                                         [&] {
                                           std::vector<int> times(t);
                                           for (int c = 0; c < t; ++c) times[c] = c + 1;
                                           return times;
                                         }(),
                                         std::move(outcome), std::move(treatment)),
                     {}};

  // True estimands under the estimator's own weighting.
  TrueEffects& effects = out.effects;
  int t_tr = 0, t_post = 0;
  for (const DGPCohort& c : cohorts) {
    const int horizon = t - (c.adoption - 1);
    t_tr = std::max(t_tr, horizon);
    t_post += c.size * horizon;
    std::vector<double> delta = c.delta;
    delta.resize(horizon, 0.0);
    effects.cohort_labels.push_back(c.adoption);
    effects.delta_by_cohort.push_back(std::move(delta));
  }
  effects.tau_ell.resize(t_tr, 0.0);
  double att_sum = 0.0;
  for (int ell = 1; ell <= t_tr; ++ell) {
    double value = 0.0;
    int n_ell = 0;
    for (std::size_t k = 0; k < cohorts.size(); ++k) {
      if (static_cast<int>(effects.delta_by_cohort[k].size()) >= ell) {
        value += cohorts[k].size * effects.delta_by_cohort[k][ell - 1];
        n_ell += cohorts[k].size;
      }
    }
    effects.tau_ell[ell - 1] = value / n_ell;
    att_sum += value;  // sum over cohorts of N_tr * delta, all (a, ell) pairs
  }
  effects.att = att_sum / t_post;
  return out;
}

}  // namespace sdid
