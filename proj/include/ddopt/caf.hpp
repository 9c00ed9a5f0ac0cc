#pragma once

// Classical delay-Doppler estimation (rho_hat = X^* y) and the Gram blocks
// X_a^* X_b needed by the adaptive solver.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ddopt/errors.hpp"
#include "ddopt/fft.hpp"
#include "ddopt/grid.hpp"
#include "ddopt/signal.hpp"

namespace ddopt {

enum class Normalization { raw, peak0dB };

/// Complex response over the full lattice: rows are Doppler bins, columns
/// delay bins. Clutter cells carry whatever the producing estimator assigns
/// (CAF values for the classical path, zero for the adapted path).
struct DDSurface {
  CMatrix values;
  Normalization normalization = Normalization::raw;

  Eigen::MatrixXd power() const { return values.cwiseAbs2(); }
};

/// Scales so the largest magnitude is exactly 1. An all-zero surface is returned unchanged.
inline DDSurface normalize_peak(const DDSurface& s) {
  DDSurface out = s;
  out.normalization = Normalization::peak0dB;
  Eigen::Index r = 0, c = 0;
  const double peak = s.values.cwiseAbs().maxCoeff(&r, &c);
  if (peak > 0.0) {
    out.values /= peak;
    out.values(r, c) /= std::abs(out.values(r, c));
  }
  return out;
}

/// Power of the detection rows only (lattice rows containing surveillance cells).
inline Eigen::MatrixXd detection_power(const DDSurface& s, const DDGrid& grid) {
  const auto& rows = grid.detection_rows();
  Eigen::MatrixXd p(static_cast<Eigen::Index>(rows.size()), s.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = s.values.row(rows[i]).cwiseAbs2();
  return p;
}

/// Places a vector ordered like X (or X_s) onto the lattice; missing entries are zero.
inline DDSurface surface_from_columns(const CVector& rho, const DDGrid& grid) {
  detail::require(static_cast<std::size_t>(rho.size()) == grid.num_cells() ||
                      static_cast<std::size_t>(rho.size()) == grid.num_surveillance(),
                  "surface_from_columns: vector length does not match grid");
  DDSurface s{CMatrix::Zero(grid.rows(), grid.cols())};
  for (Eigen::Index k = 0; k < rho.size(); ++k) {
    const Cell c = grid.cell_at(static_cast<std::size_t>(k));
    s.values(c.row, c.col) = rho[k];
  }
  return s;
}

/// Reads a lattice surface back into canonical column order.
inline CVector columns_from_surface(const DDSurface& s, const DDGrid& grid, Subset subset) {
  const auto cells = grid.cells(subset);
  CVector out(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) out[static_cast<Eigen::Index>(k)] = s.values(cells[k].row, cells[k].col);
  return out;
}

namespace detail {
inline void require_same_length(const ComplexSignal& x, const ComplexSignal& y) {
  require(x.size() == y.size(), "length mismatch: reference has " + std::to_string(x.size()) +
                                    " samples, capture has " + std::to_string(y.size()));
  require(x.sample_rate_hz() == y.sample_rate_hz(), "sample rate mismatch between reference and capture");
}
}  // namespace detail

/// Oracle path: one explicit inner product per lattice cell.
inline DDSurface classical_caf_direct(const ComplexSignal& x, const ComplexSignal& y, const DDGrid& grid) {
  detail::require_same_length(x, y);
  grid.check_fits(x.size());
  DDSurface s{CMatrix(grid.rows(), grid.cols())};
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c) {
      const Cell cell{r, c};
      s.values(r, c) = shift_replica(x, grid.delay_of(cell), grid.doppler_of(cell)).samples().dot(y.samples());
    }
  return s;
}

/// Each Doppler row is a linear cross-correlation of the de-rotated capture
/// against x, evaluated at all delays by one zero-padded FFT round trip.
inline DDSurface classical_caf(const ComplexSignal& x, const ComplexSignal& y, const DDGrid& grid) {
  detail::require_same_length(x, y);
  grid.check_fits(x.size());
  const Eigen::Index t = x.size();
  const double fs = x.sample_rate_hz();
  const std::size_t len = fft::good_size(static_cast<std::size_t>(t + grid.max_delay() + 1));

  fft::Plan& fwd = fft::forward(len);
  auto fb = fwd.buffer();
  std::fill(fb.begin(), fb.end(), cdouble{});
  for (Eigen::Index n = 0; n < t; ++n) fb[static_cast<std::size_t>(n)] = x[n];
  fwd.execute();
  std::vector<cdouble> x_spec(fb.begin(), fb.end());

  fft::Plan& inv = fft::inverse(len);
  auto ib = inv.buffer();
  const double scale = 1.0 / static_cast<double>(len);

  DDSurface s{CMatrix(grid.rows(), grid.cols())};
  for (int r = 0; r < grid.rows(); ++r) {
    const double f = grid.doppler_bins_hz()[static_cast<std::size_t>(r)];
    std::fill(fb.begin(), fb.end(), cdouble{});
    for (Eigen::Index n = 0; n < t; ++n)
      fb[static_cast<std::size_t>(n)] = y[n] * (f == 0.0 ? cdouble{1.0} : std::conj(detail::doppler_phasor(f, fs, n)));
    fwd.execute();
    for (std::size_t k = 0; k < len; ++k) ib[k] = fb[k] * std::conj(x_spec[k]);
    inv.execute();
    for (int c = 0; c < grid.cols(); ++c) s.values(r, c) = ib[static_cast<std::size_t>(grid.delay_bins()[c])] * scale;
  }
  return s;
}

struct CrossCorrelations {
  CVector surveillance;  // r_s = X_s^* y
  CVector clutter;       // r_c = X_c^* y
};

inline CrossCorrelations cross_correlations(const DDSurface& caf, const DDGrid& grid) {
  return {columns_from_surface(caf, grid, Subset::surveillance), columns_from_surface(caf, grid, Subset::clutter)};
}

inline CrossCorrelations cross_correlations(const ComplexSignal& x, const ComplexSignal& y, const DDGrid& grid) {
  return cross_correlations(classical_caf(x, y, grid), grid);
}

/// Block X_a^* X_b of the replica Gram matrix.
struct GramMatrix {
  CMatrix values;
  Subset rows = Subset::all;
  Subset cols = Subset::all;
};

/// Oracle path: materializes the replica columns.
inline GramMatrix gram_direct(const ComplexSignal& x, const DDGrid& grid, Subset a, Subset b) {
  const CMatrix xa = materialize_columns(x, grid, a);
  const CMatrix xb = materialize_columns(x, grid, b);
  GramMatrix g{xa.adjoint() * xb, a, b};
  if (a == b) g.values = 0.5 * (g.values + g.values.adjoint()).eval();
  return g;
}

namespace detail {

// Entry <r_a, r_b> for cells (d_a, f_a), (d_b, f_b) with lag l = d_a - d_b
// and dw = 2 pi (f_b - f_a) / fs:
//   exp(i dw d_a) * sum_{m = max(0, -l)}^{T-1-d_a} conj(x[m]) x[m+l] exp(i dw m).
// For a fixed (dw, l) this is a prefix sum read at T-1-d_a, so every entry
// sharing a Doppler difference and a lag costs O(1) after one O(T) pass.
inline CMatrix gram_blocks_lagsum(const ComplexSignal& x, const DDGrid& grid, const std::vector<Cell>& a,
                                  const std::vector<Cell>& b) {
  const Eigen::Index t = x.size();
  const double fs = x.sample_rate_hz();
  CMatrix g(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  if (a.empty() || b.empty()) return g;

  // cells of each list grouped by Doppler row
  std::map<int, std::vector<std::pair<Eigen::Index, int>>> rows_a, rows_b;
  for (std::size_t i = 0; i < a.size(); ++i) rows_a[a[i].row].push_back({static_cast<Eigen::Index>(i), grid.delay_of(a[i])});
  for (std::size_t j = 0; j < b.size(); ++j) rows_b[b[j].row].push_back({static_cast<Eigen::Index>(j), grid.delay_of(b[j])});

  // row pairs grouped by exact Doppler difference
  std::map<double, std::vector<std::pair<int, int>>> by_shift;
  for (const auto& [ra, unused_a] : rows_a)
    for (const auto& [rb, unused_b] : rows_b)
      by_shift[grid.doppler_bins_hz()[static_cast<std::size_t>(rb)] - grid.doppler_bins_hz()[static_cast<std::size_t>(ra)]]
          .push_back({ra, rb});

  const auto& delays = grid.delay_bins();
  const int nd = static_cast<int>(delays.size());
  const int dmax = delays.back();
  std::vector<cdouble> phase(static_cast<std::size_t>(t));
  // table[(l + dmax) * nd + delay_index(d_a)]
  std::vector<cdouble> table(static_cast<std::size_t>(2 * dmax + 1) * static_cast<std::size_t>(nd));
  std::vector<char> lag_used(static_cast<std::size_t>(2 * dmax + 1), 0);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nd; ++j) lag_used[static_cast<std::size_t>(delays[i] - delays[j] + dmax)] = 1;

  for (const auto& [df, pairs] : by_shift) {
    const double dw = 2.0 * std::numbers::pi * df / fs;
    for (Eigen::Index m = 0; m < t; ++m)
      phase[static_cast<std::size_t>(m)] = df == 0.0 ? cdouble{1.0} : std::polar(1.0, dw * static_cast<double>(m));

    for (int l = -dmax; l <= dmax; ++l) {
      if (!lag_used[static_cast<std::size_t>(l + dmax)]) continue;
      const Eigen::Index m0 = l < 0 ? -l : 0;
      // pairs with d_a < l do not exist; their table slots stay unused
      const Eigen::Index m_last = t - 1 - std::max(l, 0);
      cdouble acc{};
      Eigen::Index m = m0;
      // endpoints T-1-d visited in ascending order (descending delay)
      for (int di = nd - 1; di >= 0; --di) {
        const Eigen::Index end = std::min<Eigen::Index>(t - 1 - delays[static_cast<std::size_t>(di)], m_last);
        for (; m <= end; ++m) acc += std::conj(x[m]) * x[m + l] * phase[static_cast<std::size_t>(m)];
        table[static_cast<std::size_t>(l + dmax) * static_cast<std::size_t>(nd) + static_cast<std::size_t>(di)] = acc;
      }
    }

    for (const auto& [ra, rb] : pairs) {
      for (const auto& [i, da] : rows_a.at(ra)) {
        const cdouble rot = df == 0.0 ? cdouble{1.0} : std::polar(1.0, dw * static_cast<double>(da));
        const auto dai = static_cast<std::size_t>(std::lower_bound(delays.begin(), delays.end(), da) - delays.begin());
        for (const auto& [j, db] : rows_b.at(rb))
          g(i, j) = rot * table[static_cast<std::size_t>(da - db + dmax) * static_cast<std::size_t>(nd) + dai];
      }
    }
  }
  return g;
}

}  // namespace detail

/// Fast path, exact up to summation order; never forms a T-length column.
inline GramMatrix gram(const ComplexSignal& x, const DDGrid& grid, Subset a, Subset b) {
  grid.check_fits(x.size());
  GramMatrix g{detail::gram_blocks_lagsum(x, grid, grid.cells(a), grid.cells(b)), a, b};
  if (a == b) g.values = 0.5 * (g.values + g.values.adjoint()).eval();
  return g;
}

/// The three blocks of X^* X that the adaptive solver consumes. Depends only
/// on (x, grid), so one instance serves every capture against that reference.
struct GramBlocks {
  CMatrix ss;  // X_s^* X_s
  CMatrix sc;  // X_s^* X_c
  CMatrix cc;  // X_c^* X_c
};

inline GramBlocks compute_gram_blocks(const ComplexSignal& x, const DDGrid& grid) {
  return {gram(x, grid, Subset::surveillance, Subset::surveillance).values,
          gram(x, grid, Subset::surveillance, Subset::clutter).values,
          gram(x, grid, Subset::clutter, Subset::clutter).values};
}

// DDS1 surface dump: "DDS1", u32 rows, u32 cols, 4 reserved bytes, then
// row-major interleaved re/im float32, all little-endian.

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }
}  // namespace detail

inline void write_dds(const std::string& path, const CMatrix& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write("DDS1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(values.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(values.cols()));
  detail::put_u32(os, 0);
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      detail::put_f32(os, static_cast<float>(values(r, c).real()));
      detail::put_f32(os, static_cast<float>(values(r, c).imag()));
    }
  if (!os) throw IoError("write failed: " + path);
}

inline Eigen::MatrixXcf read_dds(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "DDS1", 4) != 0) throw IoError(path + ": not a DDS1 file");
  const std::uint32_t rows = detail::get_u32(bytes.data() + 4);
  const std::uint32_t cols = detail::get_u32(bytes.data() + 8);
  if (bytes.size() != 16 + 8ull * rows * cols) throw IoError(path + ": truncated DDS1 payload");
  Eigen::MatrixXcf out(rows, cols);
  const unsigned char* p = bytes.data() + 16;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c, p += 8)
      out(r, c) = {std::bit_cast<float>(detail::get_u32(p)), std::bit_cast<float>(detail::get_u32(p + 4))};
  return out;
}

}  // namespace ddopt
