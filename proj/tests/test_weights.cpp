#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "random_panels.hpp"
#include "sdid_event/errors.hpp"
#include "sdid_event/rng.hpp"
#include "sdid_event/weights.hpp"

using namespace sdid;

namespace {

// Reference panel used throughout: two controls (1,2,3,4) and (3,3,3,3),
// one treated (2,3,4,10) adopting at period 3. Closed forms, with
// r = sqrt(2)/2 as the effective ridge:
//   zeta    = 2^(1/4) / 2
//   omega   = ((3+sqrt 2)/7, (4-sqrt 2)/7),  omega_0 = (2+3 sqrt 2)/14
//   lambda  = (0, 1),                        lambda_0 = 3/4
PanelDataset reference_panel() {
  std::istringstream csv(
      "unit,time,outcome,treatment\n"
      "c1,1,1,0\nc1,2,2,0\nc1,3,3,0\nc1,4,4,0\n"
      "c2,1,3,0\nc2,2,3,0\nc2,3,3,0\nc2,4,3,0\n"
      "tr,1,2,0\ntr,2,3,0\ntr,3,4,1\ntr,4,10,1\n");
  return load_panel(csv);
}

const double kSqrt2 = std::sqrt(2.0);

}  // namespace

TEST_SUITE_BEGIN("weights");

TEST_CASE("column equal to targets takes all the weight at zero ridge") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 9, 2, -3, 3, 0, 4, 2;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  const auto fit = simplex_regression(X, y, 0.0);
  CHECK(fit.weights[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fit.diagnostics.objective == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.diagnostics.converged);
}

TEST_CASE("identical columns split evenly under ridge") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 1, 4, 4, 2, 2;
  Eigen::VectorXd y(3);
  y << 2, 3, 1;
  const auto fit = simplex_regression(X, y, 0.5);
  CHECK(fit.weights[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(fit.weights[1] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("random instances match the grid-search oracle") {
  // 3 columns, 4 rows, grid step 1e-3 over the 2-simplex.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, 31);
    Eigen::MatrixXd X(4, 3);
    Eigen::VectorXd y(4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) X(i, j) = 0.3 * rng.next_normal();
      y[i] = 0.3 * rng.next_normal();
    }
    const double ridge = (seed % 4 == 0) ? 0.0 : 0.02 * rng.next_unit();
    const auto fit = simplex_regression(X, y, ridge);
    const auto grid = oracles::grid_search_simplex(X, y, ridge, 1e-3);
    CAPTURE(seed);
    REQUIRE(std::fabs(fit.diagnostics.objective - grid.objective) < 1e-6);
    // the solver should never sit above the grid
    REQUIRE(fit.diagnostics.objective <= grid.objective + 1e-12);
  }
}

TEST_CASE("solver inputs are validated") {
  Eigen::MatrixXd X(2, 2);
  X << 1, 2, 3, 4;
  Eigen::VectorXd y(2);
  y << 1, 2;
  CHECK_THROWS_AS(simplex_regression(X, Eigen::VectorXd::Zero(3), 0.0), DegenerateProblem);
  CHECK_THROWS_AS(simplex_regression(X, y, -1.0), DegenerateProblem);
  CHECK_THROWS_AS(simplex_regression(Eigen::MatrixXd(0, 0), Eigen::VectorXd(0), 0.0),
                  DegenerateProblem);
}

TEST_CASE("single control gets weight one regardless of data") {
  std::istringstream csv(
      "unit,time,outcome,treatment\n"
      "c,1,5,0\nc,2,-3,0\nc,3,9,0\n"
      "t,1,0,0\nt,2,1,0\nt,3,2,1\n");
  const auto panel = load_panel(csv);
  const auto fit = solve_unit_weights(panel, 0.7);
  REQUIRE(fit.weights.size() == 1);
  CHECK(fit.weights[0] == 1.0);
  CHECK(fit.diagnostics.converged);
}

TEST_CASE("controls with identical paths share the weight when zeta > 0") {
  std::istringstream csv(
      "unit,time,outcome,treatment\n"
      "c1,1,1,0\nc1,2,3,0\nc1,3,2,0\nc1,4,2,0\n"
      "c2,1,1,0\nc2,2,3,0\nc2,3,2,0\nc2,4,2,0\n"
      "t,1,1,0\nt,2,2,0\nt,3,3,1\nt,4,3,1\n");
  const auto panel = load_panel(csv);
  const auto fit = solve_unit_weights(panel, 0.5);
  CHECK(fit.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.weights[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("reference panel: zeta and both weight vectors match closed forms") {
  const auto panel = reference_panel();

  CHECK(regularization_zeta(panel) ==
        doctest::Approx(std::pow(2.0, 0.25) * 0.5).epsilon(1e-14));

  const auto ws = solve_cohort_weights(panel);
  CHECK(ws.cohort == 3);
  CHECK(ws.zeta == doctest::Approx(std::pow(2.0, 0.25) * 0.5).epsilon(1e-14));
  CHECK(ws.zeta_time == doctest::Approx(5e-7).epsilon(1e-12));
  CHECK_FALSE(ws.zeta_degenerate);

  CHECK(ws.omega[0] == doctest::Approx((3 + kSqrt2) / 7).epsilon(1e-12));
  CHECK(ws.omega[1] == doctest::Approx((4 - kSqrt2) / 7).epsilon(1e-12));
  CHECK(ws.omega_intercept == doctest::Approx((2 + 3 * kSqrt2) / 14).epsilon(1e-12));
  CHECK(ws.lambda[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ws.lambda[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ws.lambda_intercept == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(ws.omega_diagnostics.converged);
  CHECK(ws.lambda_diagnostics.converged);
}

TEST_CASE("reference panel: solver agrees with a fine grid oracle") {
  const auto panel = reference_panel();
  const auto ws = solve_cohort_weights(panel);

  Eigen::MatrixXd X(2, 2);
  X << 1, 3, 2, 3;  // pre-period outcomes of the two controls
  Eigen::VectorXd y(2);
  y << 2, 3;  // treated mean in the pre-periods
  const auto grid = oracles::grid_search_simplex(X, y, ws.zeta * ws.zeta * 2, 1e-4);
  CHECK(std::fabs(ws.omega[0] - grid.weights[0]) < 1e-4);
  CHECK(ws.omega_diagnostics.objective <= grid.objective + 1e-12);
  CHECK(std::fabs(ws.omega_diagnostics.objective - grid.objective) < 1e-8);

  Eigen::MatrixXd Xt(2, 2);
  Xt << 1, 2, 3, 3;  // rows: controls, cols: pre-periods
  Eigen::VectorXd yt(2);
  yt << 3.5, 3;  // post means of the controls
  const auto grid_t =
      oracles::grid_search_simplex(Xt, yt, ws.zeta_time * ws.zeta_time * 2, 1e-4);
  CHECK(std::fabs(ws.lambda[1] - grid_t.weights[1]) < 1e-4);
}

TEST_CASE("single pre-period forces lambda = (1)") {
  std::istringstream csv(
      "unit,time,outcome,treatment\n"
      "c,1,5,0\nc,2,6,0\n"
      "t,1,0,0\nt,2,9,1\n");
  const auto panel = load_panel(csv);
  const auto ws = solve_cohort_weights(panel);
  REQUIRE(ws.lambda.size() == 1);
  CHECK(ws.lambda[0] == 1.0);
  CHECK(ws.zeta == 0.0);  // adoption at the second period
  CHECK(ws.zeta_degenerate);
}

TEST_CASE("constant controls leave lambda uniform") {
  std::istringstream csv(
      "unit,time,outcome,treatment\n"
      "c1,1,4,0\nc1,2,4,0\nc1,3,4,0\nc1,4,4,0\n"
      "c2,1,7,0\nc2,2,7,0\nc2,3,7,0\nc2,4,7,0\n"
      "t,1,1,0\nt,2,2,0\nt,3,5,1\nt,4,5,1\n");
  const auto panel = load_panel(csv);
  // explicit ridge: flat fit everywhere, the penalty picks the center
  const auto fit = solve_time_weights(panel, 0.5);
  CHECK(fit.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.weights[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("zeta degenerate cases") {
  // identical linear trends: all first differences equal, sigma = 0
  std::istringstream linear(
      "unit,time,outcome,treatment\n"
      "c1,1,1,0\nc1,2,2,0\nc1,3,3,0\nc1,4,4,0\n"
      "c2,1,5,0\nc2,2,6,0\nc2,3,7,0\nc2,4,8,0\n"
      "t,1,0,0\nt,2,1,0\nt,3,2,0\nt,4,9,1\n");
  CHECK(regularization_zeta(load_panel(linear)) == 0.0);

  // a single usable difference: population sd of one observation is 0
  std::istringstream single(
      "unit,time,outcome,treatment\n"
      "c,1,0,0\nc,2,1,0\nc,3,3,0\n"
      "t,1,0,0\nt,2,1,0\nt,3,9,1\n");
  CHECK(regularization_zeta(load_panel(single)) == 0.0);
}

TEST_CASE("weights stay on the simplex even when iterations run out") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed, 77);
    const int n = 2 + rng.next_below(5);
    const int k = 2 + rng.next_below(10);
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) X(i, j) = rng.next_normal();
      y[i] = rng.next_normal();
    }
    SolverOptions starved;
    starved.max_iter = seed % 2 ? 3 : 10'000;
    starved.tolerance = 1e-10;
    const auto fit = simplex_regression(X, y, 0.01, starved);
    REQUIRE(std::fabs(fit.weights.sum() - 1.0) < 1e-8);
    REQUIRE(fit.weights.minCoeff() >= -1e-8);
    // a non-converged report always means the iteration budget ran out
    if (!fit.diagnostics.converged)
      REQUIRE(fit.diagnostics.iterations == starved.max_iter);
    // never worse than the uniform starting point
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(k, 1.0 / k);
    REQUIRE(oracles::profiled_objective(X, y, 0.01, fit.weights) <=
            oracles::profiled_objective(X, y, 0.01, uniform) + 1e-12);
  }
}

TEST_CASE("huge zeta drives omega to uniform") {
  const auto panel = testsupport::random_panel(5).panel;
  const auto structure = derive_cohorts(panel);
  const auto sub = cohort_subpanel(panel, structure, structure.cohorts[0].label);
  const double scale = sub.outcome().cwiseAbs().maxCoeff();
  const auto fit = solve_unit_weights(sub, 1e8 * scale);
  const double flat = 1.0 / sub.n_controls();
  CHECK((fit.weights.array() - flat).abs().maxCoeff() < 1e-3);
}

TEST_CASE("level shifts move the intercepts, not the weights") {
  const auto gen = testsupport::random_panel(11);
  const auto structure = derive_cohorts(gen.panel);
  const auto sub = cohort_subpanel(gen.panel, structure, structure.cohorts[0].label);
  const auto base = solve_cohort_weights(sub);

  PanelDataset shifted = PanelDataset::build(
      sub.unit_labels(), sub.time_labels(),
      (sub.outcome().array() + 123.456).matrix(), sub.treatment());
  const auto moved = solve_cohort_weights(shifted);

  CHECK((base.omega - moved.omega).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((base.lambda - moved.lambda).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rescaling the outcomes leaves the weights alone") {
  const auto gen = testsupport::random_panel(12);
  const auto structure = derive_cohorts(gen.panel);
  const auto sub = cohort_subpanel(gen.panel, structure, structure.cohorts[0].label);
  const auto base = solve_cohort_weights(sub);

  // powers of two rescale every intermediate exactly
  for (double s : {2.0, 0.25, 4.0}) {
    PanelDataset scaled = PanelDataset::build(
        sub.unit_labels(), sub.time_labels(), (sub.outcome().array() * s).matrix(),
        sub.treatment());
    const auto moved = solve_cohort_weights(scaled);  // zeta recomputed inside
    CAPTURE(s);
    CHECK(moved.zeta == doctest::Approx(s * base.zeta).epsilon(1e-12));
    CHECK((base.omega - moved.omega).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((base.lambda - moved.lambda).cwiseAbs().maxCoeff() < 1e-10);
  }

  // a generic factor rounds the inputs; the barely-regularized time-weight
  // problem can move along its flat directions by a little more
  {
    PanelDataset scaled = PanelDataset::build(
        sub.unit_labels(), sub.time_labels(),
        (sub.outcome().array() * 3.0).matrix(), sub.treatment());
    const auto moved = solve_cohort_weights(scaled);
    CHECK((base.omega - moved.omega).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((base.lambda - moved.lambda).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_SUITE_END();
