#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace ddopt;

TEST(Cfar, ThresholdFactorValues) {
  // independent reference: n (pfa^(-1/n) - 1) in extended precision
  EXPECT_NEAR(cfar_threshold_factor(1e-2, 36), 4.91269198988609, 1e-9);
  EXPECT_NEAR(cfar_threshold_factor(1e-2, 126), 4.690362, 1e-6);
  EXPECT_NEAR(cfar_threshold_factor(0.5, 1), 1.0, 1e-15);
  EXPECT_GT(cfar_threshold_factor(1e-4, 36), cfar_threshold_factor(1e-2, 36));
  EXPECT_THROW(cfar_threshold_factor(0.0, 10), InvalidArgument);
  EXPECT_THROW(cfar_threshold_factor(0.1, 0), InvalidArgument);
}

TEST(Cfar, ConstantSurfaceDetectsNothing) {
  const Mask m = ca_cfar(Eigen::MatrixXd::Constant(20, 40, 3.0), {});
  EXPECT_EQ(m.count(), 0);
}

TEST(Cfar, ZeroSurfaceWithOneSpike) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(20, 40);
  p(10, 20) = 1.0;
  const Mask m = ca_cfar(p, {});
  EXPECT_EQ(m.count(), 1);
  EXPECT_TRUE(m(10, 20));
}

TEST(Cfar, SpikeOverFlatBackground) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Ones(20, 40);
  p(4, 30) = 10.0;
  const Mask m = ca_cfar(p, {});
  EXPECT_EQ(m.count(), 1);
  EXPECT_TRUE(m(4, 30));
}

TEST(Cfar, ScaleInvariant) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(1.0);
  Eigen::MatrixXd p(30, 60);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = e(rng);
  const Mask a = ca_cfar(p, {});
  const Mask b = ca_cfar(p * 1234.5, {});
  EXPECT_TRUE((a == b).all());
}

TEST(Cfar, TighterPfaFlagsSubset) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(1.0);
  Eigen::MatrixXd p(30, 60);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = e(rng);
  CfarConfig loose, tight;
  loose.pfa = 1e-1;
  tight.pfa = 1e-3;
  const Mask a = ca_cfar(p, loose);
  const Mask b = ca_cfar(p, tight);
  EXPECT_TRUE((b && !a).count() == 0);
  EXPECT_GE(a.count(), b.count());
}

TEST(Cfar, CalibratedOnExponentialNoise) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1.0);
  long flagged = 0, cells = 0;
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd p(100, 120);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = e(rng);
    flagged += ca_cfar(p, {}).count();
    cells += p.size();
  }
  const double rate = static_cast<double>(flagged) / static_cast<double>(cells);
  EXPECT_GT(rate, 0.5e-2);
  EXPECT_LT(rate, 2e-2);
}

TEST(Cfar, RejectsTinySurface) { EXPECT_THROW(ca_cfar(Eigen::MatrixXd::Ones(3, 40), {}), InvalidArgument); }

namespace {

// 5 rows (-2..2) x 20 delays, zero-Doppler clutter; detection rows 0,1,3,4.
struct ScoringFixture {
  double fs = 1000.0;
  DDGrid grid = ddopt::testing::lattice(20, -2, 2, 10.0, {0});
  SceneTruth truth;
  ScoringFixture() {
    Target t;
    t.delay_s = 5.5 / fs;   // between delay bins 5 and 6
    t.doppler_hz = 15.0;    // between rows for 10 and 20 Hz
    truth.targets.push_back(t);
  }
  Mask empty() const { return Mask::Constant(4, 20, false); }
};

}  // namespace

TEST(Scoring, NeighborhoodBracketsTarget) {
  ScoringFixture f;
  const auto nb = target_neighborhood(f.truth.targets[0], f.grid, f.fs);
  EXPECT_EQ(nb[0], (Cell{3, 5}));
  EXPECT_EQ(nb[3], (Cell{4, 6}));
}

TEST(Scoring, HitInsideNeighborhood) {
  ScoringFixture f;
  Mask m = f.empty();
  m(3, 6) = true;  // lattice row 4, delay 6
  const TrialScore s = score_trial(m, f.truth, f.grid, f.fs);
  EXPECT_EQ(s.detections(), 1);
  EXPECT_EQ(s.false_alarm_cells, 0);
  EXPECT_EQ(s.flagged_target_cells, 1);
}

TEST(Scoring, ExcludedCellIsNeitherHitNorFalseAlarm) {
  ScoringFixture f;
  Mask m = f.empty();
  m(2, 4) = true;  // lattice row 3, delay 4: in the exclusion block only
  const TrialScore s = score_trial(m, f.truth, f.grid, f.fs);
  EXPECT_EQ(s.detections(), 0);
  EXPECT_EQ(s.false_alarm_cells, 0);
  EXPECT_EQ(s.flagged_excluded_cells, 1);
}

TEST(Scoring, DistantCellIsFalseAlarmAndCellsPartition) {
  ScoringFixture f;
  Mask m = f.empty();
  m(0, 15) = true;
  const TrialScore s = score_trial(m, f.truth, f.grid, f.fs);
  EXPECT_EQ(s.false_alarm_cells, 1);
  EXPECT_EQ(s.detections(), 0);
  // exclusion: rows 2..4 of the lattice (row 5 would be off-grid, 2 is clutter) x delays 3..8
  const long excluded = 2 * 6;
  EXPECT_EQ(s.eligible_cells, 4 * 20 - excluded);
}

TEST(Scoring, RejectsMismatchedMaskAndOffGridTarget) {
  ScoringFixture f;
  EXPECT_THROW(score_trial(Mask::Constant(5, 20, false), f.truth, f.grid, f.fs), InvalidArgument);
  f.truth.targets[0].doppler_hz = 500.0;
  EXPECT_THROW(score_trial(f.empty(), f.truth, f.grid, f.fs), InvalidArgument);
}

TEST(Mask, RleRoundTrip) {
  Mask m = Mask::Constant(4, 7, false);
  m(0, 0) = m(0, 1) = m(1, 6) = m(2, 0) = m(3, 6) = true;
  const auto j = mask_to_rle_json(m);
  EXPECT_EQ(j["runs"].size(), 3u);
  EXPECT_TRUE((mask_from_rle_json(j) == m).all());
}
