#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace ddopt;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.waveform.num_subcarriers = 128;
  c.waveform.cp_length = 32;
  c.waveform.num_symbols = 6;
  const double step = c.waveform.sample_rate_hz / static_cast<double>(c.waveform.length());
  c.grid.doppler_step_hz = step;
  c.grid.doppler_min_hz = 3 * step;
  c.grid.doppler_max_hz = 9 * step;
  c.target.doppler_abs_min_hz = 3 * step;
  c.target.doppler_abs_max_hz = 6 * step;
  c.clutter.count = 10;
  c.clutter.rcs_mean_db = 10.0;
  c.gamma_list = {0.5, 0.98};
  c.pfa_list = {1e-2, 1e-4};
  c.n_trials = 6;
  c.base_seed = 99;
  c.threads = 1;
  return c;
}

std::string csv(const RocTable& t) {
  std::ostringstream os;
  write_roc_csv(os, t);
  return os.str();
}

}  // namespace

TEST(Harness, ConfigValidation) {
  ExperimentConfig c = tiny();
  c.n_trials = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = tiny();
  c.gamma_list = {0.0};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.pipeline = Pipeline::unadapted;
  EXPECT_NO_THROW(c.validate());
  c.pfa_list = {1.0};
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Harness, SameTrialTwiceIsIdentical) {
  const Experiment e(tiny());
  EXPECT_EQ(e.run_trial(3), e.run_trial(3));
  EXPECT_NE(e.trial_seed(3), e.trial_seed(4));
}

TEST(Harness, RowsCoverEveryPipelineAndRate) {
  const RocTable t = run_montecarlo(tiny());
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.failed_trials, 0);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.n_trials, 6);
    EXPECT_EQ(r.n_targets, 6);
    EXPECT_GE(r.pd, 0.0);
    EXPECT_LE(r.pd, 1.0);
    EXPECT_GE(r.pfa_observed, 0.0);
    EXPECT_LE(r.pfa_observed, 1.0);
    EXPECT_LE(r.n_false_alarms, r.n_eligible);
  }
  ASSERT_NE(t.find(std::nullopt, 1e-2), nullptr);
  ASSERT_NE(t.find(0.98, 1e-4), nullptr);
  EXPECT_EQ(csv(t).substr(0, csv(t).find('\n')), kRocCsvHeader);
}

TEST(Harness, TrialOrderDoesNotMatter) {
  const Experiment e(tiny());
  auto results = e.run_trials();
  const RocTable a = e.aggregate(results);
  std::mt19937 rng(1);
  std::shuffle(results.begin(), results.end(), rng);
  EXPECT_EQ(a.rows, e.aggregate(results).rows);
}

TEST(Harness, ThreadCountDoesNotMatter) {
  ExperimentConfig c = tiny();
  const RocTable a = run_montecarlo(c);
  c.threads = 3;
  EXPECT_EQ(csv(a), csv(run_montecarlo(c)));
}

TEST(Harness, GramCacheIsTransparent) {
  ExperimentConfig c = tiny();
  c.n_trials = 3;
  const Experiment cached(c);
  c.gram_cache = false;
  const Experiment fresh(c);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(cached.run_trial(i), fresh.run_trial(i));
}

TEST(Harness, AdaptiveStageNestsUnadaptedWithoutClutter) {
  ExperimentConfig c = tiny();
  c.grid.doppler_min_hz = c.grid.doppler_step_hz;  // keep every row
  c.clutter.count = 0;
  c.gamma_list = {1.0};
  c.n_trials = 4;
  const Experiment base(c);
  // clutter-free lattice: every cell is surveillance
  std::vector<int> delays(base.grid().delay_bins());
  const DDGrid g(delays, base.grid().doppler_bins_hz(), {});
  auto blocks = std::make_shared<const GramBlocks>(compute_gram_blocks(base.reference(), g));
  const AdaptedFilter f(blocks, GammaWeights::reduced(1.0));
  for (int i = 0; i < c.n_trials; ++i) {
    const TrialSurfaces s = base.surfaces(i);
    const ComplexSignal y = synthesize_capture(base.reference(), s.truth);
    const DDSurface u = classical_caf(base.reference(), y, g);
    const DDSurface a = surface_from_columns(f.apply(cross_correlations(u, g)), g);
    EXPECT_EQ(a.values, u.values);
  }
}

TEST(Harness, StrongTargetWithoutClutterIsDetected) {
  ExperimentConfig c = tiny();
  c.pipeline = Pipeline::unadapted;
  c.clutter.count = 0;
  c.target.snr_mean_db = 20.0;
  c.n_trials = 3;
  const RocTable t = run_montecarlo(c);
  EXPECT_EQ(t.find(std::nullopt, 1e-2)->pd, 1.0);
}

TEST(Harness, ClutterDominatedSceneFavoursAdapted) {
  ExperimentConfig c = tiny();
  c.clutter.rcs_mean_db = 25.0;
  c.clutter.rcs_std_db = 0.0;
  c.target.snr_mean_db = 8.0;
  c.gamma_list = {0.98};
  c.n_trials = 8;
  const RocTable t = run_montecarlo(c);
  EXPECT_LE(t.find(std::nullopt, 1e-2)->pd, 0.5);
  EXPECT_EQ(t.find(0.98, 1e-2)->pd, 1.0);
}

TEST(Harness, FailedTrialIsRecordedNotFatal) {
  ExperimentConfig c = tiny();
  c.pipeline = Pipeline::unadapted;
  c.target.delay_max_s = 1e-3;  // beyond the delay axis: scoring throws
  c.target.delay_min_s = 0.9e-3;
  c.n_trials = 2;
  const Experiment e(c);
  const auto results = e.run_trials();
  EXPECT_FALSE(results[0].error.empty());
  EXPECT_EQ(e.aggregate(results).failed_trials, 2);
}

TEST(Harness, TrialsJsonLines) {
  ExperimentConfig c = tiny();
  c.n_trials = 2;
  const Experiment e(c);
  std::ostringstream os;
  write_trials_jsonl(os, e.run_trials(), e);
  std::istringstream is(os.str());
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["trial"], n);
    EXPECT_EQ(j["scores"].size(), 6u);
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Harness, DeskProfileShape) {
  const ExperimentConfig d = desk_profile();
  EXPECT_EQ(d.waveform.length(), 4096);
  EXPECT_EQ(d.n_trials, 200);
  EXPECT_EQ(d.clutter.count, 50);
  const DDGrid g = build_default_grid(d.waveform.sample_rate_hz, d.grid);
  EXPECT_EQ(g.cols(), 63);
  EXPECT_EQ(g.rows(), 33);
}
