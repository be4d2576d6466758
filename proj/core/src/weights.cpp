#include "sdid_event/weights.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "sdid_event/errors.hpp"

/*
 * weights.cpp
 * -----------
 * Simplex-constrained ridge regressions behind the unit and time weights.
 * Both problems share one core: minimize over the unit simplex
 *
 *     f(w) = ||Xc w - yc||^2 + ridge ||w||^2
 *
 * where Xc, yc are the column-centered features and targets (centering
 * profiles the free intercept out in closed form). The solver is pairwise
 * Frank-Wolfe: each step moves mass from the worst active vertex to the
 * best vertex, with an exact line search on the quadratic. Pairwise steps
 * keep the iterate on the simplex by construction, can drop a coordinate
 * to exactly zero, and converge linearly on these strongly convex
 * problems, so the duality-gap stop actually triggers.
 */

namespace sdid {

namespace {

// Objective pieces in Gram form: f(w) = w'Gw - 2 h'w + yy, with the ridge
// already folded into G.
struct QuadraticForm {
  Eigen::MatrixXd gram;  // Xc'Xc + ridge * I
  Eigen::VectorXd lin;   // Xc'yc
  double const_term;     // yc'yc

  double value(const Eigen::VectorXd& w) const {
    return w.dot(gram * w) - 2.0 * lin.dot(w) + const_term;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const {
    return 2.0 * (gram * w - lin);
  }
};

// Equality-KKT solve on the face spanned by the iterate's support, pruning
// negative coordinates NNLS-style. Pairwise steps identify the right face
// quickly but crawl along it when the Gram is flat (zero or tiny ridge);
// one face solve lands on the exact minimizer instead. Updates w only when
// the result is feasible and at least as good.
void polish_on_face(const QuadraticForm& q, Eigen::VectorXd& w) {
  const int k = static_cast<int>(w.size());
  std::vector<int> support;
  for (int j = 0; j < k; ++j)
    if (w[j] > 0.0) support.push_back(j);
  const double f_before = q.value(w);

  while (support.size() > 1) {
    const int m = static_cast<int>(support.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) kkt(i, j) = 2.0 * q.gram(support[i], support[j]);
      kkt(i, m) = 1.0;
      kkt(m, i) = 1.0;
      rhs[i] = 2.0 * q.lin[support[i]];
    }
    rhs[m] = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);

    int worst = -1;
    for (int i = 0; i < m; ++i)
      if (sol[i] < 0.0 && (worst < 0 || sol[i] < sol[worst])) worst = i;
    if (worst >= 0) {
      support.erase(support.begin() + worst);
      continue;
    }

    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < m; ++i) candidate[support[i]] = sol[i];
    const double sum = candidate.sum();
    if (!(sum > 0.0) || !candidate.allFinite()) return;
    candidate /= sum;
    if (q.value(candidate) <= f_before) w = candidate;
    return;
  }
}

}  // namespace

SimplexFit simplex_regression(const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& targets, double ridge,
                              const SolverOptions& options) {
  const int n = static_cast<int>(features.rows());
  const int k = static_cast<int>(features.cols());
  if (n == 0 || k == 0) throw DegenerateProblem("empty regression");
  if (targets.size() != n) throw DegenerateProblem("target length mismatch");
  if (!(ridge >= 0.0)) throw DegenerateProblem("negative ridge");
  if (!features.allFinite() || !targets.allFinite())
    throw DegenerateProblem("non-finite inputs");

  const Eigen::RowVectorXd col_means = features.colwise().mean();
  const double target_mean = targets.mean();
  const Eigen::MatrixXd centered = features.rowwise() - col_means;
  const Eigen::VectorXd centered_targets = targets.array() - target_mean;

  QuadraticForm q;
  q.gram = centered.transpose() * centered;
  q.gram.diagonal().array() += ridge;
  q.lin = centered.transpose() * centered_targets;
  q.const_term = centered_targets.squaredNorm();

  SimplexFit fit;
  fit.weights = Eigen::VectorXd::Constant(k, 1.0 / k);

  const double f0 = std::max(q.value(fit.weights), 0.0);
  // A gap at the rounding noise of the gradient computation counts as zero;
  // without this floor an exact fit (f0 = 0) could never certify. The noise
  // scale follows the terms that cancel inside the gradient, not the
  // (possibly tiny) gradient itself.
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double grad_scale =
      2.0 * (q.gram.cwiseAbs().maxCoeff() + q.lin.cwiseAbs().maxCoeff());
  const double stop_gap =
      std::max(options.tolerance * f0, 64.0 * eps * grad_scale);

  Eigen::VectorXd& w = fit.weights;
  SolverDiagnostics& diag = fit.diagnostics;

  if (k > 1) {
    // Pairwise steps pull the right vertices into the support; a periodic
    // face solve finishes the crawl along flat faces.
    constexpr int kPolishEvery = 64;
    int it = 0;
    bool certified = false;
    while (it < options.max_iter) {
      const Eigen::VectorXd grad = q.gradient(w);

      // Frank-Wolfe vertex: lowest gradient coordinate (first on ties).
      int best = 0;
      for (int j = 1; j < k; ++j)
        if (grad[j] < grad[best]) best = j;
      if (grad.dot(w) - grad[best] <= stop_gap) {
        certified = true;
        break;
      }

      // Away vertex: highest gradient among coordinates carrying mass.
      int away = -1;
      for (int j = 0; j < k; ++j)
        if (w[j] > 0.0 && (away < 0 || grad[j] > grad[away])) away = j;
      if (away == best) break;  // all mass already on the best vertex

      // Pairwise direction e_best - e_away, step capped by the available mass.
      const double slope = grad[best] - grad[away];  // < 0 here
      const double curvature = q.gram(best, best) - 2.0 * q.gram(best, away) +
                               q.gram(away, away);
      double step = w[away];
      if (curvature > 0.0) step = std::min(step, -slope / (2.0 * curvature));
      if (step <= 0.0) break;

      if (step == w[away]) {
        w[best] += w[away];
        w[away] = 0.0;  // drop step, exact zero
      } else {
        w[best] += step;
        w[away] -= step;
      }
      ++it;
      if (it % kPolishEvery == 0) polish_on_face(q, w);
    }
    diag.iterations = it;
    if (!certified) polish_on_face(q, w);
  }

  // Guard against drift from repeated pairwise updates.
  w /= w.sum();

  // Certify the returned point, whatever produced it.
  const Eigen::VectorXd grad = q.gradient(w);
  int best = 0;
  for (int j = 1; j < k; ++j)
    if (grad[j] < grad[best]) best = j;
  diag.duality_gap = std::max(0.0, grad.dot(w) - grad[best]);
  diag.objective = q.value(w);
  diag.converged = diag.duality_gap <= stop_gap;

  fit.intercept = target_mean - col_means.dot(w);
  return fit;
}

NoiseScale control_noise_scale(const PanelDataset& subpanel) {
  const int a = subpanel_adoption_col(subpanel);
  NoiseScale scale;

  // First differences with both endpoints strictly before adoption.
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < subpanel.n_controls(); ++i) {
    for (int c = 0; c + 1 < a; ++c) {
      const double d = subpanel.outcome()(i, c + 1) - subpanel.outcome()(i, c);
      sum += d;
      sum_sq += d * d;
      ++scale.n_diffs;
    }
  }
  if (scale.n_diffs < 2) return scale;

  const double mean = sum / scale.n_diffs;
  const double var = sum_sq / scale.n_diffs - mean * mean;
  scale.sigma = var > 0.0 ? std::sqrt(var) : 0.0;
  return scale;
}

double regularization_zeta(const PanelDataset& subpanel) {
  const int a = subpanel_adoption_col(subpanel);
  if (a < 2) return 0.0;  // adoption at the second period: no differences

  const NoiseScale scale = control_noise_scale(subpanel);
  const double n_post = static_cast<double>(subpanel.n_treated()) *
                        (subpanel.n_periods() - a);
  return std::pow(n_post, 0.25) * scale.sigma;
}

SimplexFit solve_unit_weights(const PanelDataset& subpanel, double zeta,
                              const SolverOptions& options) {
  const int a = subpanel_adoption_col(subpanel);
  if (a < 1) throw DegenerateProblem("cohort has no pre-period");
  const int n_co = subpanel.n_controls();

  // Rows are pre-periods, columns are control units.
  Eigen::MatrixXd features(a, n_co);
  Eigen::VectorXd targets(a);
  for (int c = 0; c < a; ++c) {
    features.row(c) = subpanel.outcome().col(c).head(n_co).transpose();
    targets[c] = subpanel.treated_mean(c);
  }
  return simplex_regression(features, targets, zeta * zeta * a, options);
}

SimplexFit solve_time_weights(const PanelDataset& subpanel, double zeta_time,
                              const SolverOptions& options) {
  const int a = subpanel_adoption_col(subpanel);
  if (a < 1) throw DegenerateProblem("cohort has no pre-period");
  const int n_co = subpanel.n_controls();
  const int t = subpanel.n_periods();

  // Rows are control units, columns are pre-periods; targets are each
  // control's mean outcome over the post window.
  const Eigen::MatrixXd features = subpanel.outcome().topLeftCorner(n_co, a);
  const Eigen::VectorXd targets =
      subpanel.outcome().block(0, a, n_co, t - a).rowwise().mean();
  return simplex_regression(features, targets, zeta_time * zeta_time * n_co,
                            options);
}

WeightSet solve_cohort_weights(const PanelDataset& subpanel,
                               const SolverOptions& options, bool uniform) {
  const int a = subpanel_adoption_col(subpanel);
  const int n_co = subpanel.n_controls();

  WeightSet ws;
  ws.cohort = subpanel.time_labels()[a];
  ws.zeta_degenerate = (a < 2);
  const NoiseScale scale = control_noise_scale(subpanel);
  ws.zeta = regularization_zeta(subpanel);
  ws.zeta_time = 1e-6 * scale.sigma;  // tie-breaking only

  if (uniform) {
    ws.omega = Eigen::VectorXd::Constant(n_co, 1.0 / n_co);
    ws.lambda = Eigen::VectorXd::Constant(a, 1.0 / a);
    // Intercepts evaluated at the flat weights, for the audit dump.
    Eigen::VectorXd pre_treated(a);
    for (int c = 0; c < a; ++c) pre_treated[c] = subpanel.treated_mean(c);
    ws.omega_intercept =
        pre_treated.mean() -
        subpanel.outcome().topLeftCorner(n_co, a).mean();
    ws.lambda_intercept =
        subpanel.outcome()
            .block(0, a, n_co, subpanel.n_periods() - a)
            .rowwise()
            .mean()
            .mean() -
        subpanel.outcome().topLeftCorner(n_co, a).rowwise().mean().mean();
    ws.omega_diagnostics.converged = true;
    ws.lambda_diagnostics.converged = true;
    return ws;
  }

  SimplexFit unit = solve_unit_weights(subpanel, ws.zeta, options);
  ws.omega = std::move(unit.weights);
  ws.omega_intercept = unit.intercept;
  ws.omega_diagnostics = unit.diagnostics;

  SimplexFit time = solve_time_weights(subpanel, ws.zeta_time, options);
  ws.lambda = std::move(time.weights);
  ws.lambda_intercept = time.intercept;
  ws.lambda_diagnostics = time.diagnostics;
  return ws;
}

}  // namespace sdid
