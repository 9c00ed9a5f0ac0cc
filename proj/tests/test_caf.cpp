#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"

using namespace ddopt;
using ddopt::testing::gaussian_signal;
using ddopt::testing::lattice;

TEST(Caf, FftMatchesDirectSmall) {
  const ComplexSignal x = gaussian_signal(16, 1, 16.0);
  const ComplexSignal y = gaussian_signal(16, 2, 16.0);
  const DDGrid g = lattice(5, -3, 3, 1.0, {0});
  const DDSurface a = classical_caf_direct(x, y, g);
  const DDSurface b = classical_caf(x, y, g);
  EXPECT_LT(ddopt::testing::rel_frobenius(b.values, a.values), 1e-10);
}

TEST(Caf, FftMatchesDirectOfdm) {
  const ComplexSignal x = ddopt::testing::small_ofdm(128, 32, 6);
  const ComplexSignal y = gaussian_signal(x.size(), 4);
  const DDGrid g = lattice(20, -4, 4, x.sample_rate_hz() / static_cast<double>(x.size()), {0});
  EXPECT_LT(ddopt::testing::rel_frobenius(classical_caf(x, y, g).values, classical_caf_direct(x, y, g).values), 1e-10);
}

TEST(Caf, PeakAtTargetCell) {
  const ComplexSignal x = ddopt::testing::small_ofdm(128, 32, 8);
  const double step = x.sample_rate_hz() / static_cast<double>(x.size());
  const DDGrid g = lattice(16, -5, 5, step, {0});
  const ComplexSignal y = shift_replica(x, 9, 3 * step);
  Eigen::Index r = 0, c = 0;
  classical_caf(x, y, g).power().maxCoeff(&r, &c);
  EXPECT_EQ(r, 8);
  EXPECT_EQ(c, 9);
}

TEST(Caf, SuperpositionAndClutterDecomposition) {
  // X^* y = G rho + X^* z
  const ComplexSignal x = gaussian_signal(96, 5);
  const DDGrid g = lattice(6, -2, 2, 1e5, {0});
  CVector rho = complex_noise(static_cast<Eigen::Index>(g.num_cells()), 9);
  const CMatrix xall = materialize_columns(x, g, Subset::all);
  const CVector z = complex_noise(96, 11);
  const ComplexSignal y(xall * rho + z, x.sample_rate_hz());
  const CVector lhs = columns_from_surface(classical_caf(x, y, g), g, Subset::all);
  const CVector rhs = gram(x, g, Subset::all, Subset::all).values * rho + xall.adjoint() * z;
  EXPECT_LT((lhs - rhs).norm() / rhs.norm(), 1e-10);
}

TEST(Gram, FastMatchesDirect) {
  const ComplexSignal x = ddopt::testing::small_ofdm(64, 16, 4);
  const DDGrid g = lattice(9, -3, 3, 2e4, {0, 2});
  for (auto [a, b] : {std::pair{Subset::surveillance, Subset::surveillance},
                      std::pair{Subset::surveillance, Subset::clutter}, std::pair{Subset::clutter, Subset::clutter},
                      std::pair{Subset::all, Subset::all}}) {
    const CMatrix d = gram_direct(x, g, a, b).values;
    const CMatrix f = gram(x, g, a, b).values;
    EXPECT_LT(ddopt::testing::rel_frobenius(f, d), 1e-11);
  }
}

TEST(Gram, HermitianWithDominantDiagonal) {
  const ComplexSignal x = ddopt::testing::small_ofdm(64, 16, 4);
  const DDGrid g = lattice(8, -2, 2, 1e5, {0});
  const CMatrix m = gram(x, g, Subset::all, Subset::all).values;
  EXPECT_EQ(m, m.adjoint());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    EXPECT_GE(m(i, i).real(), 0.0);
    for (Eigen::Index j = 0; j < m.cols(); ++j) EXPECT_LE(std::abs(m(i, j)), std::abs(m(i, i)) + 1e-9);
  }
  const GramBlocks blocks = compute_gram_blocks(x, g);
  EXPECT_EQ(blocks.ss.rows(), 32);
  EXPECT_EQ(blocks.sc.cols(), 8);
  EXPECT_EQ(blocks.cc.rows(), 8);
}

TEST(Surface, NormalizePeakMakesMaxExactlyOne) {
  DDSurface s{CMatrix::Random(5, 7) * 3.3};
  const DDSurface n = normalize_peak(s);
  EXPECT_EQ(n.values.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(n.normalization, Normalization::peak0dB);
}

TEST(Surface, ColumnsRoundTrip) {
  const DDGrid g = lattice(4, -1, 1, 1.0, {0});
  const CVector rho = complex_noise(static_cast<Eigen::Index>(g.num_cells()), 2);
  const DDSurface s = surface_from_columns(rho, g);
  EXPECT_EQ(columns_from_surface(s, g, Subset::all), rho);
  const DDSurface only_s = surface_from_columns(rho.head(static_cast<Eigen::Index>(g.num_surveillance())), g);
  for (const Cell& c : g.clutter_cells()) EXPECT_EQ(only_s.values(c.row, c.col), cdouble{});
  EXPECT_EQ(detection_power(s, g).rows(), 2);
}

TEST(Dds, WriteReadRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "ddopt_test_roundtrip.dds").string();
  const CMatrix m = CMatrix::Random(3, 5);
  write_dds(path, m);
  EXPECT_EQ(std::filesystem::file_size(path), 16u + 8u * 15u);
  const Eigen::MatrixXcf r = read_dds(path);
  ASSERT_EQ(r.rows(), 3);
  ASSERT_EQ(r.cols(), 5);
  EXPECT_LT((r.cast<cdouble>() - m).cwiseAbs().maxCoeff(), 1e-6);
  std::filesystem::remove(path);
  EXPECT_THROW(read_dds(path), IoError);
}
