#pragma once

// Two-dimensional cell-averaging CFAR and neighborhood-based scoring of
// detections and false alarms.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddopt/errors.hpp"
#include "ddopt/grid.hpp"
#include "ddopt/scene.hpp"

namespace ddopt {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Training extents are totals per dimension, split across the two sides of
/// the guard ring (the odd cell, if any, goes to the increasing-index side).
struct CfarConfig {
  int guard_delay = 1;
  int guard_doppler = 1;
  int train_delay = 12;
  int train_doppler = 6;
  double pfa = 1e-2;

  void validate() const {
    detail::require(guard_delay >= 0 && guard_doppler >= 0, "CfarConfig: guard cells must be nonnegative");
    detail::require(train_delay >= 1 && train_doppler >= 1, "CfarConfig: training extents must be positive");
    detail::require(pfa > 0.0 && pfa < 1.0, "CfarConfig: pfa must lie in (0, 1)");
  }
};

/// Exact CA threshold multiplier for n_train i.i.d. exponential cells.
inline double cfar_threshold_factor(double pfa, int n_train) {
  detail::require(pfa > 0.0 && pfa < 1.0, "cfar_threshold_factor: pfa must lie in (0, 1)");
  detail::require(n_train >= 1, "cfar_threshold_factor: n_train must be positive");
  const double n = static_cast<double>(n_train);
  // n (pfa^(-1/n) - 1), written to stay accurate when pfa -> 1
  return n * std::expm1(-std::log(pfa) / n);
}

inline Mask ca_cfar(const Eigen::MatrixXd& power, const CfarConfig& cfg) {
  cfg.validate();
  const Eigen::Index rows = power.rows();
  const Eigen::Index cols = power.cols();
  const int td_lo = cfg.train_doppler / 2, td_hi = cfg.train_doppler - td_lo;
  const int tr_lo = cfg.train_delay / 2, tr_hi = cfg.train_delay - tr_lo;
  if (rows <= cfg.guard_doppler + std::max(td_lo, td_hi) || cols <= cfg.guard_delay + std::max(tr_lo, tr_hi))
    throw InvalidArgument("ca_cfar: surface is too small for the guard and training extents");

  // summed-area table with a zero border
  Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(rows + 1, cols + 1);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      sat(r + 1, c + 1) = power(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
  auto box = [&](Eigen::Index r0, Eigen::Index r1, Eigen::Index c0, Eigen::Index c1) {
    r0 = std::max<Eigen::Index>(r0, 0);
    c0 = std::max<Eigen::Index>(c0, 0);
    r1 = std::min(r1, rows - 1);
    c1 = std::min(c1, cols - 1);
    const double s = sat(r1 + 1, c1 + 1) - sat(r0, c1 + 1) - sat(r1 + 1, c0) + sat(r0, c0);
    return std::pair{s, (r1 - r0 + 1) * (c1 - c0 + 1)};
  };

  std::map<Eigen::Index, double> alpha;
  Mask mask = Mask::Constant(rows, cols, false);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto [outer, n_outer] = box(r - cfg.guard_doppler - td_lo, r + cfg.guard_doppler + td_hi,
                                        c - cfg.guard_delay - tr_lo, c + cfg.guard_delay + tr_hi);
      const auto [inner, n_inner] =
          box(r - cfg.guard_doppler, r + cfg.guard_doppler, c - cfg.guard_delay, c + cfg.guard_delay);
      const Eigen::Index n = n_outer - n_inner;
      // cancellation in the table can leave tiny negative residue
      const double mean = std::max(0.0, outer - inner) / static_cast<double>(n);
      auto it = alpha.find(n);
      if (it == alpha.end()) it = alpha.emplace(n, cfar_threshold_factor(cfg.pfa, static_cast<int>(n))).first;
      mask(r, c) = mean > 0.0 ? power(r, c) > it->second * mean : power(r, c) > 0.0;
    }
  return mask;
}

/// Exclusion block is exclusion_doppler x exclusion_delay cells centered on
/// the 2 x 2 target neighborhood; an odd leftover cell goes to the
/// increasing-index side.
struct ScoringConfig {
  int exclusion_doppler_cells = 4;
  int exclusion_delay_cells = 6;

  void validate() const {
    detail::require(exclusion_doppler_cells >= 2 && exclusion_delay_cells >= 2,
                    "ScoringConfig: exclusion neighborhood must contain the 2 x 2 target neighborhood");
  }
};

struct TrialScore {
  std::vector<bool> detected;    // one entry per target
  long false_alarm_cells = 0;
  long eligible_cells = 0;
  long flagged_target_cells = 0;    // flagged cells inside some target neighborhood
  long flagged_excluded_cells = 0;  // flagged, inside an exclusion block, outside every target neighborhood

  long detections() const { return static_cast<long>(std::count(detected.begin(), detected.end(), true)); }
  friend bool operator==(const TrialScore&, const TrialScore&) = default;
};

namespace detail {
// Index i of the bracketing pair (bins[i], bins[i+1]) around v.
inline int bracket(const auto& bins, double v, const char* what) {
  const double lo = static_cast<double>(bins.front());
  const double hi = static_cast<double>(bins.back());
  if (bins.size() < 2 || v < lo || v > hi) throw InvalidArgument(std::string("score_trial: target ") + what +
                                                                  " outside grid coverage");
  auto it = std::upper_bound(bins.begin(), bins.end(), v, [](double a, const auto& b) { return a < static_cast<double>(b); });
  int i = static_cast<int>(it - bins.begin()) - 1;
  return std::min(i, static_cast<int>(bins.size()) - 2);
}
}  // namespace detail

/// Lattice cells (row, col) of the 2 x 2 neighborhood bounding a target.
inline std::array<Cell, 4> target_neighborhood(const Target& t, const DDGrid& grid, double fs) {
  const int c0 = detail::bracket(grid.delay_bins(), t.delay_s * fs, "delay");
  const int r0 = detail::bracket(grid.doppler_bins_hz(), t.doppler_hz, "Doppler");
  return {Cell{r0, c0}, Cell{r0, c0 + 1}, Cell{r0 + 1, c0}, Cell{r0 + 1, c0 + 1}};
}

/// `mask` is over grid.detection_rows() x delay bins.
inline TrialScore score_trial(const Mask& mask, const SceneTruth& truth, const DDGrid& grid, double fs,
                              const ScoringConfig& cfg = {}) {
  cfg.validate();
  const auto& det_rows = grid.detection_rows();
  detail::require(mask.rows() == static_cast<Eigen::Index>(det_rows.size()) && mask.cols() == grid.cols(),
                  "score_trial: mask dimensions do not match the grid's detection surface");

  const Eigen::Index rows = mask.rows();
  const Eigen::Index cols = mask.cols();
  Mask eligible(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) eligible(i, c) = !grid.is_clutter({det_rows[static_cast<std::size_t>(i)], static_cast<int>(c)});

  Mask in_target = Mask::Constant(rows, cols, false);
  Mask in_exclusion = Mask::Constant(rows, cols, false);
  TrialScore score;

  const int ex_d_lo = (cfg.exclusion_doppler_cells - 2) / 2;
  const int ex_d_hi = cfg.exclusion_doppler_cells - 2 - ex_d_lo;
  const int ex_t_lo = (cfg.exclusion_delay_cells - 2) / 2;
  const int ex_t_hi = cfg.exclusion_delay_cells - 2 - ex_t_lo;

  for (const Target& t : truth.targets) {
    const auto nb = target_neighborhood(t, grid, fs);
    bool hit = false;
    for (const Cell& cell : nb) {
      const auto i = grid.detection_row_of(cell.row);
      if (!i || !eligible(*i, cell.col)) continue;
      in_target(*i, cell.col) = true;
      hit = hit || mask(*i, cell.col);
    }
    score.detected.push_back(hit);

    const int r0 = nb[0].row - ex_d_lo, r1 = nb[3].row + ex_d_hi;
    const int c0 = std::max(0, nb[0].col - ex_t_lo), c1 = std::min(grid.cols() - 1, nb[3].col + ex_t_hi);
    for (int r = std::max(0, r0); r <= std::min(grid.rows() - 1, r1); ++r) {
      const auto i = grid.detection_row_of(r);
      if (!i) continue;
      for (int c = c0; c <= c1; ++c) in_exclusion(*i, c) = true;
    }
  }

  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!eligible(i, c)) continue;
      const bool flagged = mask(i, c);
      if (in_target(i, c)) {
        score.flagged_target_cells += flagged;
      } else if (in_exclusion(i, c)) {
        score.flagged_excluded_cells += flagged;
      } else {
        ++score.eligible_cells;
        score.false_alarm_cells += flagged;
      }
    }
  return score;
}

/// Run-length encoding of the set cells in row-major order: [[start, length], ...].
inline nlohmann::json mask_to_rle_json(const Mask& mask) {
  nlohmann::json runs = nlohmann::json::array();
  const Eigen::Index cols = mask.cols();
  const Eigen::Index total = mask.size();
  Eigen::Index k = 0;
  while (k < total) {
    if (!mask(k / cols, k % cols)) {
      ++k;
      continue;
    }
    const Eigen::Index start = k;
    while (k < total && mask(k / cols, k % cols)) ++k;
    runs.push_back({start, k - start});
  }
  return {{"rows", mask.rows()}, {"cols", cols}, {"runs", runs}};
}

inline Mask mask_from_rle_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Mask m = Mask::Constant(rows, cols, false);
  for (const auto& run : j.at("runs")) {
    const auto start = run.at(0).get<Eigen::Index>();
    const auto len = run.at(1).get<Eigen::Index>();
    detail::require(start >= 0 && len >= 0 && start + len <= rows * cols, "mask_from_rle_json: run out of range");
    for (Eigen::Index k = start; k < start + len; ++k) m(k / cols, k % cols) = true;
  }
  return m;
}

}  // namespace ddopt
