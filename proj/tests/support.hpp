#pragma once

#include <random>
#include <vector>

#include "ddopt/ddopt.hpp"

namespace ddopt::testing {

inline ComplexSignal gaussian_signal(Eigen::Index t, std::uint64_t seed, double fs = 15.36e6) {
  return {complex_noise(t, seed), fs};
}

inline ComplexSignal small_ofdm(int n_fft, int cp, int symbols, std::uint64_t seed = 1, double fs = 15.36e6) {
  OfdmConfig c;
  c.num_subcarriers = n_fft;
  c.cp_length = cp;
  c.num_symbols = symbols;
  c.seed = seed;
  c.sample_rate_hz = fs;
  return generate_ofdm_reference(c);
}

/// Delays 0..n_delay-1 and Doppler rows k*step for k in [k_lo, k_hi]; the
/// listed rows (as k values) are clutter.
inline DDGrid lattice(int n_delay, int k_lo, int k_hi, double step, const std::vector<int>& clutter_k) {
  std::vector<int> delays;
  for (int d = 0; d < n_delay; ++d) delays.push_back(d);
  std::vector<double> dopplers;
  for (int k = k_lo; k <= k_hi; ++k) dopplers.push_back(k * step);
  std::vector<Cell> clutter;
  for (int k : clutter_k)
    for (int d = 0; d < n_delay; ++d) clutter.push_back({k - k_lo, d});
  return {delays, dopplers, clutter};
}

inline double rel_frobenius(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace ddopt::testing
