#pragma once

// Complex baseband signals, delay/Doppler replica operators and the
// synthetic CP-OFDM reference generator.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

#include "ddopt/errors.hpp"
#include "ddopt/fft.hpp"
#include "ddopt/rng.hpp"

namespace ddopt {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Finite block of complex baseband samples at a fixed sample rate.
class ComplexSignal {
 public:
  ComplexSignal(CVector samples, double sample_rate_hz) : samples_(std::move(samples)), fs_(sample_rate_hz) {
    detail::require(samples_.size() >= 1, "ComplexSignal: length must be >= 1");
    detail::require(std::isfinite(fs_) && fs_ > 0.0, "ComplexSignal: sample rate must be positive");
  }

  const CVector& samples() const noexcept { return samples_; }
  Eigen::Index size() const noexcept { return samples_.size(); }
  double sample_rate_hz() const noexcept { return fs_; }
  cdouble operator[](Eigen::Index n) const { return samples_[n]; }

  double energy() const { return samples_.squaredNorm(); }
  double mean_power() const { return energy() / static_cast<double>(size()); }

 private:
  CVector samples_;
  double fs_;
};

inline double energy(const ComplexSignal& x) { return x.energy(); }

enum class Modulation { qpsk };

struct OfdmConfig {
  int num_subcarriers = 1024;
  int cp_length = 256;
  int num_symbols = 120;
  double active_subcarrier_fraction = 600.0 / 1024.0;
  Modulation modulation = Modulation::qpsk;
  std::uint64_t seed = 1;
  double sample_rate_hz = 15.36e6;

  Eigen::Index length() const {
    return static_cast<Eigen::Index>(num_symbols) * (num_subcarriers + cp_length);
  }
  int active_subcarriers() const {
    const int k = static_cast<int>(std::lround(active_subcarrier_fraction * num_subcarriers));
    return k < 1 ? 1 : k;
  }
};

/// CP-OFDM with random QPSK on a contiguous block of subcarriers centred on
/// DC; the remaining band edges are zero. Output is scaled to unit mean power.
inline ComplexSignal generate_ofdm_reference(const OfdmConfig& cfg) {
  detail::require(cfg.num_subcarriers > 0, "OfdmConfig: num_subcarriers must be positive");
  detail::require(cfg.cp_length >= 0, "OfdmConfig: cp_length must be nonnegative");
  detail::require(cfg.num_symbols > 0, "OfdmConfig: num_symbols must be positive");
  detail::require(cfg.active_subcarrier_fraction > 0.0 && cfg.active_subcarrier_fraction <= 1.0,
                  "OfdmConfig: active_subcarrier_fraction must lie in (0, 1]");
  detail::require(cfg.sample_rate_hz > 0.0, "OfdmConfig: sample rate must be positive");

  const int n_fft = cfg.num_subcarriers;
  const int n_active = cfg.active_subcarriers();
  const int first = -(n_active / 2);
  const Eigen::Index symbol_len = n_fft + cfg.cp_length;

  Engine rng = make_engine(derive_seed(cfg.seed, streams::waveform));
  std::bernoulli_distribution bit(0.5);
  const double h = 1.0 / std::numbers::sqrt2;

  CVector out(cfg.length());
  fft::Plan& ifft = fft::inverse(static_cast<std::size_t>(n_fft));
  auto buf = ifft.buffer();
  for (int s = 0; s < cfg.num_symbols; ++s) {
    std::fill(buf.begin(), buf.end(), cdouble{});
    for (int k = first; k < first + n_active; ++k) {
      const double re = bit(rng) ? h : -h;
      const double im = bit(rng) ? h : -h;
      buf[static_cast<std::size_t>(((k % n_fft) + n_fft) % n_fft)] = {re, im};
    }
    ifft.execute();
    const Eigen::Index base = s * symbol_len;
    for (int n = 0; n < cfg.cp_length; ++n) out[base + n] = buf[static_cast<std::size_t>(n_fft - cfg.cp_length + n)];
    for (int n = 0; n < n_fft; ++n) out[base + cfg.cp_length + n] = buf[static_cast<std::size_t>(n)];
  }

  const double p = out.squaredNorm() / static_cast<double>(out.size());
  out /= std::sqrt(p);
  return {std::move(out), cfg.sample_rate_hz};
}

namespace detail {
inline cdouble doppler_phasor(double doppler_hz, double fs, Eigen::Index n) {
  return std::polar(1.0, 2.0 * std::numbers::pi * doppler_hz * static_cast<double>(n) / fs);
}
}  // namespace detail

/// Zero-padded linear delay by `delay_samples` followed by Doppler
/// modulation exp(i 2 pi f n / fs). Samples shifted past the window end are dropped.
inline ComplexSignal shift_replica(const ComplexSignal& x, Eigen::Index delay_samples, double doppler_hz) {
  const Eigen::Index t = x.size();
  detail::require(delay_samples >= 0 && delay_samples < t, "shift_replica: delay must lie in [0, T)");
  CVector out = CVector::Zero(t);
  const double fs = x.sample_rate_hz();
  if (doppler_hz == 0.0) {
    out.tail(t - delay_samples) = x.samples().head(t - delay_samples);
  } else {
    for (Eigen::Index n = delay_samples; n < t; ++n)
      out[n] = x[n - delay_samples] * detail::doppler_phasor(doppler_hz, fs, n);
  }
  return {std::move(out), fs};
}

/// Off-grid replica: fractional delay as a linear phase ramp on the
/// full-length DFT, then Doppler modulation. The first floor(delay*fs)
/// samples, which would hold wrapped-around content, are zeroed.
inline ComplexSignal fractional_target_replica(const ComplexSignal& x, double delay_seconds, double doppler_hz) {
  const Eigen::Index t = x.size();
  const double fs = x.sample_rate_hz();
  const double delay = delay_seconds * fs;
  detail::require(std::isfinite(delay) && delay >= 0.0 && delay < static_cast<double>(t),
                  "fractional_target_replica: delay must lie in [0, T/fs)");

  fft::Plan& fwd = fft::forward(static_cast<std::size_t>(t));
  auto buf = fwd.buffer();
  for (Eigen::Index n = 0; n < t; ++n) buf[static_cast<std::size_t>(n)] = x[n];
  fwd.execute();
  for (Eigen::Index k = 0; k < t; ++k) {
    // signed frequency index in [-T/2, T/2)
    const Eigen::Index ks = k < (t + 1) / 2 ? k : k - t;
    buf[static_cast<std::size_t>(k)] *=
        std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(ks) * delay / static_cast<double>(t));
  }
  fft::Plan& inv = fft::inverse(static_cast<std::size_t>(t));
  std::copy(buf.begin(), buf.end(), inv.buffer().begin());
  inv.execute();
  auto ib = inv.buffer();

  const auto whole = static_cast<Eigen::Index>(std::floor(delay));
  const double scale = 1.0 / static_cast<double>(t);
  CVector out(t);
  for (Eigen::Index n = 0; n < t; ++n) {
    out[n] = n < whole ? cdouble{} : ib[static_cast<std::size_t>(n)] * scale;
    if (doppler_hz != 0.0) out[n] *= detail::doppler_phasor(doppler_hz, fs, n);
  }
  return {std::move(out), fs};
}

}  // namespace ddopt
