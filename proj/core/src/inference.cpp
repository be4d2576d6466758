#include "sdid_event/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "sdid_event/errors.hpp"
#include "sdid_event/rng.hpp"

/*
 * inference.cpp
 * -------------
 * Resampling variance. One replication = one deterministic function of
 * (seed, replication index): draw a pseudo-panel, re-run the estimator,
 * collect (att, tau_ell ..., placebo ...). Replications land in a buffer
 * indexed by replication number and the standard deviations are reduced
 * from that buffer in index order, so thread count and scheduling cannot
 * change the output.
 */

namespace sdid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kRedrawCap = 100;  // per replication; 100 * B attempts overall

// Flattened targets of one estimate: [att, tau_1.., placebo_0, placebo_-1..].
// Slots the replication cannot produce stay NaN.
std::vector<double> collect_targets(const EstimationResult& result, int t_tr,
                                    int max_depth) {
  std::vector<double> row(1 + t_tr + max_depth, kNaN);
  row[0] = result.att;
  for (const EventEstimate& e : result.event)
    if (e.ell <= t_tr) row[e.ell] = e.tau;
  for (const EventEstimate& e : result.placebo)
    if (-e.ell < max_depth) row[1 + t_tr - e.ell] = e.tau;
  return row;
}

struct ReplicationPlan {
  const PanelDataset* panel;
  const EstimationOptions* options;
  std::uint64_t seed;
  int t_tr;
  int max_depth;
};

PanelDataset resample_units(const PanelDataset& panel,
                            const std::vector<int>& draw) {
  const int t = panel.n_periods();
  const int n = static_cast<int>(draw.size());
  std::vector<std::string> labels(n);
  Eigen::MatrixXd outcome(n, t);
  Eigen::MatrixXi treatment(n, t);
  for (int r = 0; r < n; ++r) {
    const int src = draw[r];
    // Duplicates get distinct labels and count as distinct units.
    labels[r] = panel.unit_labels()[src] + "#" + std::to_string(r);
    outcome.row(r) = panel.outcome().row(src);
    treatment.row(r) = panel.treatment().row(src);
  }
  return PanelDataset::build(std::move(labels), panel.time_labels(),
                             std::move(outcome), std::move(treatment));
}

// One bootstrap replication; returns the target row and the number of
// rejected draws, or throws TooManyFailedDraws.
std::vector<double> bootstrap_replication(const ReplicationPlan& plan, int rep,
                                          int* rejected) {
  const PanelDataset& panel = *plan.panel;
  const int n = panel.n_units();
  Rng rng(plan.seed, static_cast<std::uint64_t>(rep));

  std::vector<int> draw(n);
  for (int attempt = 0;; ++attempt) {
    if (attempt >= kRedrawCap) throw TooManyFailedDraws();
    bool any_control = false, any_treated = false;
    for (int r = 0; r < n; ++r) {
      draw[r] = rng.next_below(n);
      (panel.is_control(draw[r]) ? any_control : any_treated) = true;
    }
    if (any_control && any_treated) break;
    ++*rejected;
  }

  const EstimationResult result = estimate(resample_units(panel, draw), *plan.options);
  return collect_targets(result, plan.t_tr, plan.max_depth);
}

// One placebo replication: fake-treat a without-replacement sample of the
// controls using the true cohort layout.
std::vector<double> placebo_replication(const ReplicationPlan& plan,
                                        const CohortStructure& structure,
                                        int rep) {
  const PanelDataset& panel = *plan.panel;
  const int n_co = panel.n_controls();
  const int n_tr = panel.n_treated();
  Rng rng(plan.seed, static_cast<std::uint64_t>(rep));

  // Partial Fisher-Yates: first n_tr entries are the fake-treated controls.
  std::vector<int> pool(n_co);
  for (int i = 0; i < n_co; ++i) pool[i] = i;
  for (int i = 0; i < n_tr; ++i)
    std::swap(pool[i], pool[i + rng.next_below(n_co - i)]);

  const int t = panel.n_periods();
  Eigen::MatrixXd outcome(n_co, t);
  Eigen::MatrixXi treatment = Eigen::MatrixXi::Zero(n_co, t);
  std::vector<std::string> labels(n_co);
  for (int r = 0; r < n_co; ++r) {
    labels[r] = panel.unit_labels()[pool[r]];
    outcome.row(r) = panel.outcome().row(pool[r]);
  }
  int next = 0;
  for (const Cohort& c : structure.cohorts)
    for (int j = 0; j < c.n_tr; ++j, ++next)
      for (int col = c.col; col < t; ++col) treatment(next, col) = 1;

  const EstimationResult result = estimate(
      PanelDataset::build(std::move(labels), panel.time_labels(),
                          std::move(outcome), std::move(treatment)),
      *plan.options);
  return collect_targets(result, plan.t_tr, plan.max_depth);
}

// Runs `reps` independent replications across `threads` workers into an
// index-ordered buffer.
template <typename Fn>
void run_replications(int reps, int threads, std::vector<std::vector<double>>& rows,
                      std::vector<int>& rejected, Fn&& replication) {
  threads = std::clamp(threads, 1, reps);
  if (threads == 1) {
    for (int b = 0; b < reps; ++b) rows[b] = replication(b, &rejected[b]);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int b = w; b < reps; b += threads) rows[b] = replication(b, &rejected[b]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& th : workers) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

VarianceResult reduce(std::vector<std::vector<double>>& rows, int t_tr,
                      int max_depth) {
  VarianceResult out;
  const int n_targets = 1 + t_tr + max_depth;
  auto sd_of = [&](int slot, int* n_valid) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : rows)
      if (!std::isnan(row[slot])) {
        sum += row[slot];
        ++n;
      }
    *n_valid = n;
    if (n < 2) return kNaN;
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& row : rows)
      if (!std::isnan(row[slot])) ss += (row[slot] - mean) * (row[slot] - mean);
    return std::sqrt(ss / (n - 1));
  };

  int n_valid = 0;
  out.se_att = sd_of(0, &n_valid);
  for (int slot = 1; slot < n_targets; ++slot) {
    const int ell = slot <= t_tr ? slot : t_tr - slot + 1;  // 1..t_tr then 0,-1,..
    const double se = sd_of(slot, &n_valid);
    out.se_by_ell[ell] = se;
    out.valid_reps_by_ell[ell] = n_valid;
  }
  return out;
}

}  // namespace

VarianceResult bootstrap_se(const PanelDataset& panel,
                            const EstimationOptions& options, int reps,
                            std::uint64_t seed, int threads) {
  if (reps < 2) throw Error("bootstrap needs at least 2 replications");
  if (panel.n_units() < 2) throw DegeneratePanel("fewer than two units");
  if (panel.n_controls() == 0) throw DegeneratePanel("no control units");
  if (panel.n_treated() == 0) throw DegeneratePanel("no treated units");

  const CohortStructure structure = derive_cohorts(panel);
  int max_depth = 0;
  for (const Cohort& c : structure.cohorts) max_depth = std::max(max_depth, c.col);

  ReplicationPlan plan{&panel, &options, seed, structure.t_tr, max_depth};
  std::vector<std::vector<double>> rows(reps);
  std::vector<int> rejected(reps, 0);
  run_replications(reps, threads, rows, rejected,
                   [&](int b, int* rej) { return bootstrap_replication(plan, b, rej); });

  VarianceResult out = reduce(rows, structure.t_tr, max_depth);
  out.method = VarianceMethod::bootstrap;
  out.reps = reps;
  out.seed = seed;
  for (int r : rejected) out.failed_reps += r;
  return out;
}

VarianceResult placebo_se(const PanelDataset& panel,
                          const EstimationOptions& options, int reps,
                          std::uint64_t seed, int threads) {
  if (reps < 2) throw Error("placebo variance needs at least 2 replications");
  if (panel.n_controls() <= panel.n_treated())
    throw InsufficientControls(panel.n_controls(), panel.n_treated());

  const CohortStructure structure = derive_cohorts(panel);
  int max_depth = 0;
  for (const Cohort& c : structure.cohorts) max_depth = std::max(max_depth, c.col);

  ReplicationPlan plan{&panel, &options, seed, structure.t_tr, max_depth};
  std::vector<std::vector<double>> rows(reps);
  std::vector<int> rejected(reps, 0);
  run_replications(reps, threads, rows, rejected, [&](int b, int* rej) {
    (void)rej;
    return placebo_replication(plan, structure, b);
  });

  VarianceResult out = reduce(rows, structure.t_tr, max_depth);
  out.method = VarianceMethod::placebo;
  out.reps = reps;
  out.seed = seed;
  return out;
}

std::pair<double, double> confidence_interval(double estimate, double se,
                                              double level) {
  if (!(se >= 0.0)) throw Error("standard error must be nonnegative");
  if (!(level > 0.0 && level < 1.0)) throw Error("level must be in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  return {estimate - z * se, estimate + z * se};
}

}  // namespace sdid
