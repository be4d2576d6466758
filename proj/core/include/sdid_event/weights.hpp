#pragma once

#include <Eigen/Dense>

#include "sdid_event/panel.hpp"

namespace sdid {

struct SolverOptions {
  // Relative duality-gap threshold: stop once gap <= tolerance * f0, where
  // f0 is the objective at the uniform starting point. Keeping the test
  // relative makes the solve path invariant to rescaling the outcomes.
  double tolerance = 1e-10;
  int max_iter = 10'000;
};

struct SolverDiagnostics {
  double objective = 0.0;    // value of the full objective at the returned point
  double duality_gap = 0.0;  // Frank-Wolfe gap at the returned point
  int iterations = 0;
  bool converged = false;
};

struct SimplexFit {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  SolverDiagnostics diagnostics;
};

// Minimizes ||intercept + features * w - targets||^2 + ridge * ||w||^2 over
// the unit simplex, intercept free. The intercept is profiled out in closed
// form (centering), the simplex part is solved by pairwise Frank-Wolfe with
// exact line search from the uniform point. Deterministic: ties in the
// vertex selection break toward the lowest index.
SimplexFit simplex_regression(const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& targets, double ridge,
                              const SolverOptions& options = {});

// Noise scale for the regularization rule: population standard deviation of
// the pooled control first differences within the pre-period window.
// Fewer than two usable differences give sigma = 0.
struct NoiseScale {
  double sigma = 0.0;
  int n_diffs = 0;
};
NoiseScale control_noise_scale(const PanelDataset& subpanel);

// zeta = (N_tr * horizon)^(1/4) * sigma for the cohort subpanel; 0 when the
// cohort adopts at the second period (no usable first differences).
double regularization_zeta(const PanelDataset& subpanel);

// Unit weights omega: fit the cohort's treated mean path over the
// pre-periods with a simplex combination of control units, ridge
// zeta^2 * (#pre-periods).
SimplexFit solve_unit_weights(const PanelDataset& subpanel, double zeta,
                              const SolverOptions& options = {});

// Time weights lambda: fit each control's post-period mean with a simplex
// combination of its pre-period outcomes, ridge zeta_time^2 * N_co.
SimplexFit solve_time_weights(const PanelDataset& subpanel, double zeta_time,
                              const SolverOptions& options = {});

// Both weight vectors for one cohort plus the inputs that produced them.
struct WeightSet {
  int cohort = 0;  // adoption period, time label space
  Eigen::VectorXd omega;
  double omega_intercept = 0.0;
  Eigen::VectorXd lambda;
  double lambda_intercept = 0.0;
  double zeta = 0.0;
  double zeta_time = 0.0;
  bool zeta_degenerate = false;  // adoption at second period, zeta forced to 0
  SolverDiagnostics omega_diagnostics;
  SolverDiagnostics lambda_diagnostics;
};

// Runs the regularization rule and both solves for one cohort subpanel.
// With uniform = true the solver is bypassed and omega/lambda are set flat
// (diagnostic mode; turns the estimator into plain difference-in-differences
// for a single cohort).
WeightSet solve_cohort_weights(const PanelDataset& subpanel,
                               const SolverOptions& options = {},
                               bool uniform = false);

}  // namespace sdid
