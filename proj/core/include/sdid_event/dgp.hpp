#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdid_event/panel.hpp"

namespace sdid {

// One synthetic cohort: `adoption` is a 1-based period in (1, T], `delta`
// the true dynamic effects delta_1, delta_2, ... applied from adoption on
// (padded with zeros up to the cohort horizon when shorter).
struct DGPCohort {
  int adoption = 2;
  int size = 1;
  std::vector<double> delta;
};

// Two-way model with an optional single interactive factor:
//   Y[i,t] = alpha_i + beta_t + loading_i * factor_t + delta_(t-a_i+1) D[i,t] + eps
// alpha, beta, eps are normal with the given scales; loadings and factor
// values are fixed vectors (empty disables the factor term). Everything is
// a pure function of `seed`.
struct DGPSpec {
  int n_controls = 1;
  std::vector<DGPCohort> cohorts;
  int n_periods = 2;
  double sd_unit = 0.0;
  double sd_time = 0.0;
  double sd_noise = 0.0;
  std::vector<double> factor_loadings;  // size n_controls + sum of cohort sizes
  std::vector<double> factor_values;    // size n_periods
  std::uint64_t seed = 0;
};

// True estimands implied by the spec, aggregated with the same cohort-size
// weighting the estimator uses.
struct TrueEffects {
  std::vector<int> cohort_labels;
  std::vector<std::vector<double>> delta_by_cohort;  // padded to each horizon
  std::vector<double> tau_ell;                       // ell = 1 .. t_tr
  double att = 0.0;
};

struct GeneratedPanel {
  PanelDataset panel;
  TrueEffects effects;
};

GeneratedPanel generate(const DGPSpec& spec);

// JSON (de)serialization for the CLI: the generate subcommand reads a spec
// file and writes the true effects sidecar.
DGPSpec dgp_spec_from_json(const std::string& text);
std::string dgp_spec_to_json(const DGPSpec& spec);
std::string true_effects_to_json(const TrueEffects& effects);

}  // namespace sdid
