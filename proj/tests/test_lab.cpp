#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "latinbox/lab.hpp"

using namespace latinbox;

namespace {

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.kind = "sweep";
  c.n = 2;
  c.shape = "cube";
  c.p_grid = {0.0, 0.3, 0.6, 0.9, 1.0};
  c.trials = 400;
  c.seed = 17;
  return c;
}

}  // namespace

TEST(Config, JsonRoundTripAndValidation) {
  ExperimentConfig c = small_sweep();
  c.threads = 3;
  const ExperimentConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"trials", "many"}}), ConfigError);
  ExperimentConfig bad = c;
  bad.trials = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.p_grid = {1.5};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Config, ShapeRules) {
  ExperimentConfig c;
  c.n = 12;
  c.eps = 0.5;
  c.shape = "rows";
  EXPECT_EQ(shape_dims(c), (Dims{6, 12, 12}));
  c.shape = "symbols";
  EXPECT_EQ(shape_dims(c), (Dims{12, 12, 18}));
  c.shape = "cube";
  EXPECT_EQ(shape_dims(c), (Dims{12, 12, 12}));
}

TEST(ParallelMap, OrderedAndExceptionSafe) {
  const auto out = parallel_map(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map(10, 2,
                            [](std::size_t i) {
                              if (i == 5) throw std::runtime_error("boom");
                              return 0;
                            }),
               std::runtime_error);
}

TEST(Stats, Wilson) {
  const Interval a = wilson_interval(0, 100);
  EXPECT_EQ(a.lo, 0.0);
  EXPECT_GT(a.hi, 0.0);
  const Interval b = wilson_interval(50, 100);
  EXPECT_NEAR(b.lo, 0.4038, 1e-4);
  EXPECT_NEAR(b.hi, 0.5962, 1e-4);
  const Interval c = wilson_interval(100, 100);
  EXPECT_NEAR(c.hi, 1.0, 1e-12);
}

TEST(Stats, Chernoff) {
  EXPECT_NEAR(chernoff_tail(100, 0.5, 0.2, TailSide::Lower), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(chernoff_tail(100, 0.5, 0.2, TailSide::Upper), std::exp(-2.0 / 3.0), 1e-15);
  EXPECT_GT(chernoff_tail(100, 0.5, 1e-8, TailSide::Lower), 1 - 1e-12);
  EXPECT_THROW(chernoff_tail(100, 0.5, 0.0, TailSide::Lower), std::invalid_argument);
  const double alpha = chernoff_alpha(1000, 0.3, 1e-3, TailSide::Upper);
  EXPECT_NEAR(chernoff_tail(1000, 0.3, alpha, TailSide::Upper), 1e-3, 1e-12);
}

TEST(Stats, LogisticRecoversKnownCurve) {
  std::vector<BinomialRow> rows;
  for (int i = 0; i <= 20; ++i) {
    const double x = i / 20.0;
    const double pr = 1 / (1 + std::exp(-(-6 + 20 * x)));
    rows.push_back({x, static_cast<std::uint64_t>(std::llround(pr * 100000)), 100000});
  }
  const LogisticFit fit = fit_logistic(rows);
  EXPECT_TRUE(fit.warning.empty());
  EXPECT_NEAR(fit.p50, 0.3, 1e-3);
  EXPECT_NEAR(interpolated_p50(rows), 0.3, 0.02);
}

TEST(Stats, LogisticWarnsOnDecreasingData) {
  std::vector<BinomialRow> rows = {{0.1, 90, 100}, {0.5, 50, 100}, {0.9, 10, 100}};
  const LogisticFit fit = fit_logistic(rows);
  EXPECT_FALSE(fit.warning.empty());
  EXPECT_TRUE(std::isnan(fit.p50));
  EXPECT_EQ(monotonicity_violations(rows), 2);
}

TEST(Sweep, TrivialRowsAndCubeCurve) {
  const ExperimentConfig c = small_sweep();
  const SweepResult r = run_threshold_sweep(c);
  ASSERT_EQ(r.rows.size(), 5u);
  EXPECT_EQ(r.rows.front().phat, 0.0);
  EXPECT_EQ(r.rows.back().phat, 1.0);
  const Polynomial q = q_small(2);
  for (const auto& row : r.rows) {
    const double sigma = std::sqrt(q(row.p) * (1 - q(row.p)) / row.trials);
    EXPECT_LE(std::abs(row.phat - q(row.p)), 3 * sigma + 1e-12) << row.p;
  }
  EXPECT_EQ(r.monotone_violations, 0);
  EXPECT_FALSE(r.one_sided);
}

TEST(Sweep, EmptyGridRejected) {
  ExperimentConfig c = small_sweep();
  c.p_grid.clear();
  EXPECT_THROW(run_threshold_sweep(c), ConfigError);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  ExperimentConfig c = small_sweep();
  c.trials = 50;
  const SweepResult a = run_threshold_sweep(c);
  c.threads = 4;
  const SweepResult b = run_threshold_sweep(c);
  EXPECT_EQ(sweep_csv(a), sweep_csv(b));
  EXPECT_EQ(sweep_jsonl(a, false), sweep_jsonl(b, false));
  EXPECT_EQ(sweep_summary(c, a).dump(), sweep_summary(c, b).dump());
}

TEST(Sweep, TrialsReplayFromDerivedSeed) {
  ExperimentConfig c = small_sweep();
  c.trials = 20;
  const SweepResult r = run_threshold_sweep(c);
  for (const auto& t : r.trials) {
    const Array3D a = sample_binomial(shape_dims(c), t.p, t.seed);
    EXPECT_EQ(run_finder("exact", a, c.node_cap, derive_seed(t.seed, 1)).status, t.status);
  }
}

TEST(Sweep, ConstructiveFinderFlagsOneSided) {
  ExperimentConfig c;
  c.n = 4;
  c.shape = "cube";
  c.finder = "block";
  c.p_grid = {0.9};
  c.trials = 20;
  const SweepResult r = run_threshold_sweep(c);
  EXPECT_TRUE(r.one_sided);
  EXPECT_TRUE(sweep_summary(c, r).contains("caveat"));
}

TEST(Hitting, SingleCell) {
  const HittingTrial t = hitting_trial(1, 1, 5, 0);
  EXPECT_EQ(t.tau_shaft, 1u);
  EXPECT_EQ(t.tau_box, 1u);
  EXPECT_TRUE(t.equal);
}

TEST(Hitting, BinarySearchMatchesLinearScan) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const int m = n + static_cast<int>(rng.below(3));
    const std::uint64_t seed = derive_seed(4, static_cast<std::uint64_t>(i));
    const HittingTrial bin = hitting_trial(n, m, seed, 0);
    const HittingTrial lin = hitting_trial(n, m, seed, 0, true);
    ASSERT_TRUE(bin.valid && lin.valid);
    EXPECT_EQ(bin.tau_box, lin.tau_box);
    EXPECT_LE(bin.tau_shaft, bin.tau_box);
  }
}

TEST(Hitting, RunRecordsOrdering) {
  ExperimentConfig c;
  c.kind = "hitting";
  c.n = 6;
  c.eps = 0.5;
  c.trials = 20;
  const HittingResult r = run_hitting_time(c);
  EXPECT_EQ(r.trials.size(), 20u);
  EXPECT_EQ(r.order_violations, 0u);
  EXPECT_EQ(r.m, 9);
  for (std::size_t i = 0; i < r.trials.size(); ++i) EXPECT_EQ(r.trials[i].index, i);
  c.threads = 3;
  EXPECT_EQ(hitting_jsonl(run_hitting_time(c), false), hitting_jsonl(r, false));
}

TEST(QValidation, Rows) {
  const auto rows = run_q_validation(2, {1.0, 0.9}, 20000, 5);
  EXPECT_EQ(rows[0].phat, 1.0);
  EXPECT_NEAR(rows[1].q, 0.88173, 1e-5);
  EXPECT_LE(std::abs(rows[1].z), 3.0);
  for (const auto& r : rows)
    if (r.flagged) EXPECT_GT(r.observed_alpha, r.chernoff_alpha);
  EXPECT_THROW(run_q_validation(4, {0.5}, 10, 1), ConfigError);
}

TEST(Packing, SmokeRunAndTrend) {
  const auto runs = run_packing_campaign({10, 20}, 3, 1.0, 9);
  ASSERT_EQ(runs.size(), 6u);
  for (const auto& r : runs)
    for (const auto& s : r.trajectory.samples) EXPECT_LE(s.deg_mean, r.n);
  const double trend = deviation_trend(runs, 10, 20);
  EXPECT_GE(trend, 0.0);
  EXPECT_LE(trend, 1.0);
  const std::string csv = packing_summary_csv(runs);
  EXPECT_EQ(csv.rfind("n,seed_index,seed,sup_deg_dev,sup_codeg_dev\r\n", 0), 0u);
}

TEST(Packing, DeviationShrinksWithN) {
  const auto runs = run_packing_campaign({50, 200}, 10, 1.0, 77, 4);
  const double trend = deviation_trend(runs, 50, 200);
  RecordProperty("trend", std::to_string(trend));
  EXPECT_GE(trend, 0.6);
}

TEST(Plot, EmptyDataGivesAxesOnly) {
  const std::string svg = emit_plot("p,successes,trials,phat,lo,hi\r\n", PlotKind::Curve);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
  EXPECT_EQ(svg.find("<polygon"), std::string::npos);
}

TEST(Plot, CurveHasBandAndLine) {
  const SweepResult r = run_threshold_sweep(small_sweep());
  const std::string svg = emit_plot(sweep_csv(r), PlotKind::Curve);
  EXPECT_NE(svg.find("<polygon"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_EQ(svg, emit_plot(sweep_csv(r), PlotKind::Curve));
}

TEST(Plot, TrajectoryOverlaysPredictions) {
  std::ostringstream os;
  write_trajectory_csv(os, process_pack(8, 64, 0, 1));
  const std::string svg = emit_plot(os.str(), PlotKind::Trajectory);
  std::size_t lines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
  EXPECT_EQ(lines, 4u);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
}

TEST(Plot, SchemaMismatchRejected) {
  EXPECT_THROW(emit_plot("a,b\r\n1,2\r\n", PlotKind::Curve), SchemaError);
  EXPECT_THROW(emit_plot("p,successes,trials,phat,lo,hi\r\n1,2\r\n", PlotKind::Curve), SchemaError);
}
