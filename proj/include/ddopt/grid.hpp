#pragma once

// Delay-Doppler test lattice with its surveillance/clutter partition.
//
// Column ordering of the replica matrix X is [X_s X_c]: surveillance cells
// first, then clutter cells, each block in Doppler-major (row-major) order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ddopt/errors.hpp"
#include "ddopt/signal.hpp"

namespace ddopt {

/// Lattice coordinate: (Doppler row, delay column).
struct Cell {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Subset { surveillance, clutter, all };

class DDGrid {
 public:
  /// `clutter` lists the lattice cells assigned to X_c; every other lattice
  /// point is a surveillance cell.
  DDGrid(std::vector<int> delay_bins, std::vector<double> doppler_bins_hz, std::vector<Cell> clutter)
      : delays_(std::move(delay_bins)), dopplers_(std::move(doppler_bins_hz)) {
    detail::require(!delays_.empty(), "DDGrid: no delay bins");
    detail::require(!dopplers_.empty(), "DDGrid: no Doppler bins");
    detail::require(delays_.front() >= 0, "DDGrid: delay bins must be nonnegative");
    for (std::size_t i = 1; i < delays_.size(); ++i)
      detail::require(delays_[i] > delays_[i - 1], "DDGrid: delay bins must be strictly ascending");
    for (std::size_t i = 1; i < dopplers_.size(); ++i)
      detail::require(dopplers_[i] > dopplers_[i - 1], "DDGrid: Doppler bins must be strictly ascending");

    std::sort(clutter.begin(), clutter.end());
    detail::require(std::adjacent_find(clutter.begin(), clutter.end()) == clutter.end(),
                    "DDGrid: duplicate clutter cell");
    for (const Cell& c : clutter)
      detail::require(c.row >= 0 && c.row < rows() && c.col >= 0 && c.col < cols(), "DDGrid: clutter cell off lattice");

    is_clutter_.assign(static_cast<std::size_t>(rows() * cols()), false);
    for (const Cell& c : clutter) is_clutter_[lattice_index(c)] = true;

    for (int r = 0; r < rows(); ++r)
      for (int c = 0; c < cols(); ++c)
        if (!is_clutter_[lattice_index({r, c})]) surveillance_.push_back({r, c});
    clutter_ = std::move(clutter);

    flat_of_.assign(is_clutter_.size(), 0);
    for (std::size_t k = 0; k < surveillance_.size(); ++k) flat_of_[lattice_index(surveillance_[k])] = k;
    for (std::size_t k = 0; k < clutter_.size(); ++k)
      flat_of_[lattice_index(clutter_[k])] = surveillance_.size() + k;

    for (int r = 0; r < rows(); ++r) {
      bool any = false;
      for (int c = 0; c < cols(); ++c) any = any || !is_clutter_[lattice_index({r, c})];
      if (any) detection_rows_.push_back(r);
    }
  }

  int rows() const noexcept { return static_cast<int>(dopplers_.size()); }
  int cols() const noexcept { return static_cast<int>(delays_.size()); }

  const std::vector<int>& delay_bins() const noexcept { return delays_; }
  const std::vector<double>& doppler_bins_hz() const noexcept { return dopplers_; }
  const std::vector<Cell>& surveillance_cells() const noexcept { return surveillance_; }
  const std::vector<Cell>& clutter_cells() const noexcept { return clutter_; }

  std::size_t num_surveillance() const noexcept { return surveillance_.size(); }
  std::size_t num_clutter() const noexcept { return clutter_.size(); }
  std::size_t num_cells() const noexcept { return is_clutter_.size(); }

  bool is_clutter(Cell c) const { return is_clutter_[lattice_index(c)]; }

  int delay_of(Cell c) const { return delays_[static_cast<std::size_t>(c.col)]; }
  double doppler_of(Cell c) const { return dopplers_[static_cast<std::size_t>(c.row)]; }
  int max_delay() const noexcept { return delays_.back(); }

  /// Column index of `c` in X = [X_s X_c].
  std::size_t flat_index(Cell c) const { return flat_of_[lattice_index(c)]; }

  Cell cell_at(std::size_t flat) const {
    return flat < surveillance_.size() ? surveillance_[flat] : clutter_.at(flat - surveillance_.size());
  }

  /// Cells of a subset in canonical column order.
  std::vector<Cell> cells(Subset s) const {
    switch (s) {
      case Subset::surveillance:
        return surveillance_;
      case Subset::clutter:
        return clutter_;
      case Subset::all:
        break;
    }
    std::vector<Cell> all = surveillance_;
    all.insert(all.end(), clutter_.begin(), clutter_.end());
    return all;
  }

  /// Lattice rows holding at least one surveillance cell. Detection surfaces
  /// are formed over these rows only.
  const std::vector<int>& detection_rows() const noexcept { return detection_rows_; }

  /// Position of lattice row `r` among detection_rows(), if present.
  std::optional<int> detection_row_of(int r) const {
    auto it = std::lower_bound(detection_rows_.begin(), detection_rows_.end(), r);
    if (it == detection_rows_.end() || *it != r) return std::nullopt;
    return static_cast<int>(it - detection_rows_.begin());
  }

  /// Throws if any delay bin is not a valid shift for a signal of length T.
  void check_fits(Eigen::Index t) const {
    detail::require(max_delay() < t, "DDGrid: delay bin " + std::to_string(max_delay()) +
                                         " does not fit a signal of length " + std::to_string(t));
  }

  friend bool operator==(const DDGrid& a, const DDGrid& b) {
    return a.delays_ == b.delays_ && a.dopplers_ == b.dopplers_ && a.clutter_ == b.clutter_;
  }

 private:
  std::size_t lattice_index(Cell c) const {
    return static_cast<std::size_t>(c.row) * delays_.size() + static_cast<std::size_t>(c.col);
  }

  std::vector<int> delays_;
  std::vector<double> dopplers_;
  std::vector<Cell> surveillance_;
  std::vector<Cell> clutter_;
  std::vector<bool> is_clutter_;
  std::vector<std::size_t> flat_of_;
  std::vector<int> detection_rows_;
};

struct GridConfig {
  double max_delay_seconds = 4.0365e-6;
  double doppler_min_hz = 300.0;
  double doppler_max_hz = 1300.0;
  double doppler_step_hz = 100.0;
};

/// Whole-sample delays 0..floor(max_delay*fs); Doppler rows k*step for
/// |k| <= floor(doppler_max/step), including k = 0. The zero-Doppler row is
/// the clutter set; every other cell is surveillance. Rows below doppler_min
/// are kept so the surface stays contiguous for CFAR windows.
inline DDGrid build_default_grid(double fs, double max_delay_seconds, double doppler_min_hz, double doppler_max_hz,
                                 double doppler_step_hz) {
  detail::require(fs > 0.0, "build_default_grid: sample rate must be positive");
  detail::require(doppler_step_hz > 0.0, "build_default_grid: Doppler step must be positive");
  detail::require(doppler_min_hz >= 0.0 && doppler_min_hz <= doppler_max_hz,
                  "build_default_grid: need 0 <= doppler_min <= doppler_max");
  const double span = max_delay_seconds * fs;
  detail::require(std::isfinite(span) && span >= 1.0, "build_default_grid: max_delay * fs must be >= 1");

  // Tolerate representation error when the bound is an exact multiple.
  const int max_bin = static_cast<int>(std::floor(span * (1.0 + 1e-12)));
  const int k_max = static_cast<int>(std::floor(doppler_max_hz / doppler_step_hz * (1.0 + 1e-12)));
  detail::require(k_max >= 1, "build_default_grid: empty Doppler coverage");
  detail::require(static_cast<double>(k_max) * doppler_step_hz >= doppler_min_hz * (1.0 - 1e-12),
                  "build_default_grid: empty Doppler coverage");

  std::vector<int> delays(static_cast<std::size_t>(max_bin) + 1);
  for (int d = 0; d <= max_bin; ++d) delays[static_cast<std::size_t>(d)] = d;
  std::vector<double> dopplers;
  for (int k = -k_max; k <= k_max; ++k) dopplers.push_back(k * doppler_step_hz);

  std::vector<Cell> clutter;
  for (int c = 0; c <= max_bin; ++c) clutter.push_back({k_max, c});
  return {std::move(delays), std::move(dopplers), std::move(clutter)};
}

inline DDGrid build_default_grid(double fs, const GridConfig& g) {
  return build_default_grid(fs, g.max_delay_seconds, g.doppler_min_hz, g.doppler_max_hz, g.doppler_step_hz);
}

/// Replica columns for a subset, in canonical order. Column k equals
/// shift_replica(x, delay(k), doppler(k)).
inline CMatrix materialize_columns(const ComplexSignal& x, const DDGrid& grid, Subset subset) {
  grid.check_fits(x.size());
  const auto cells = grid.cells(subset);
  CMatrix out(x.size(), static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = shift_replica(x, grid.delay_of(cells[k]), grid.doppler_of(cells[k])).samples();
  return out;
}

}  // namespace ddopt
