#pragma once

// Randomized captures y = X rho + z: discrete zero-Doppler clutter on whole
// sample delays, off-grid moving targets and unit-variance complex noise.
// Every dB quantity is referenced to the per-sample noise variance with a
// unit-power reference.

#include "json.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ddopt/errors.hpp"
#include "ddopt/rng.hpp"
#include "ddopt/signal.hpp"

namespace ddopt {

struct ClutterParams {
  int count = 1000;
  double rcs_mean_db = -6.0;
  double rcs_std_db = 6.0;
  double max_delay_seconds = 4.0365e-6;
};

struct TargetParams {
  double doppler_abs_min_hz = 300.0;
  double doppler_abs_max_hz = 1300.0;
  double delay_min_s = 0.39e-6;
  double delay_max_s = 3.71e-6;
  double snr_mean_db = 2.0;
  double snr_std_db = 0.33;
  int count = 1;
};

struct ClutterScatterer {
  int delay_samples = 0;
  cdouble amplitude;
  double rcs_db = 0.0;
};

struct Target {
  double delay_s = 0.0;
  double doppler_hz = 0.0;
  cdouble amplitude;
  double snr_db = 0.0;
};

struct SceneTruth {
  std::vector<ClutterScatterer> clutter;
  std::vector<Target> targets;
  std::uint64_t noise_seed = 0;
};

inline void validate(const ClutterParams& cp) {
  detail::require(cp.count >= 0, "ClutterParams: count must be nonnegative");
  detail::require(cp.rcs_std_db >= 0.0, "ClutterParams: rcs_std_db must be nonnegative");
  detail::require(cp.max_delay_seconds >= 0.0, "ClutterParams: max_delay_seconds must be nonnegative");
}

inline void validate(const TargetParams& tp) {
  detail::require(tp.count >= 0, "TargetParams: count must be nonnegative");
  detail::require(tp.doppler_abs_min_hz >= 0.0 && tp.doppler_abs_min_hz <= tp.doppler_abs_max_hz,
                  "TargetParams: Doppler interval must satisfy 0 <= min <= max");
  detail::require(tp.delay_min_s >= 0.0 && tp.delay_min_s <= tp.delay_max_s,
                  "TargetParams: delay interval must satisfy 0 <= min <= max");
  detail::require(tp.snr_std_db >= 0.0, "TargetParams: snr_std_db must be nonnegative");
}

/// Draws one scene. Target amplitudes are 10^(snr/20) against unit noise,
/// so the classical peak-to-floor ratio at the target cell is energy(x) * 10^(snr/10).
inline SceneTruth sample_scene(const ClutterParams& cp, const TargetParams& tp, double fs, std::uint64_t seed) {
  validate(cp);
  validate(tp);
  detail::require(fs > 0.0, "sample_scene: sample rate must be positive");

  Engine rng = make_engine(derive_seed(seed, streams::scene));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneTruth truth;
  truth.noise_seed = derive_seed(seed, streams::noise);

  const int max_bin = static_cast<int>(std::floor(cp.max_delay_seconds * fs * (1.0 + 1e-12)));
  std::normal_distribution<double> rcs(cp.rcs_mean_db, cp.rcs_std_db);
  std::uniform_int_distribution<int> delay_bin(0, max_bin);
  truth.clutter.reserve(static_cast<std::size_t>(cp.count));
  for (int i = 0; i < cp.count; ++i) {
    ClutterScatterer s;
    s.rcs_db = cp.rcs_std_db > 0.0 ? rcs(rng) : cp.rcs_mean_db;
    s.delay_samples = delay_bin(rng);
    s.amplitude = std::polar(std::pow(10.0, s.rcs_db / 20.0), phase(rng));
    truth.clutter.push_back(s);
  }

  std::normal_distribution<double> snr(tp.snr_mean_db, tp.snr_std_db);
  for (int i = 0; i < tp.count; ++i) {
    Target t;
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    t.doppler_hz = sign * (tp.doppler_abs_min_hz + (tp.doppler_abs_max_hz - tp.doppler_abs_min_hz) * unit(rng));
    t.delay_s = tp.delay_min_s + (tp.delay_max_s - tp.delay_min_s) * unit(rng);
    t.snr_db = tp.snr_std_db > 0.0 ? snr(rng) : tp.snr_mean_db;
    t.amplitude = std::polar(std::pow(10.0, t.snr_db / 20.0), phase(rng));
    truth.targets.push_back(t);
  }
  return truth;
}

struct CaptureOptions {
  bool clutter = true;
  bool targets = true;
  bool noise = true;
};

/// Unit-variance circular complex Gaussian noise from a dedicated seed.
inline CVector complex_noise(Eigen::Index n, std::uint64_t seed) {
  Engine rng = make_engine(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CVector z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    const double im = g(rng);
    z[i] = {re, im};
  }
  return z;
}

inline ComplexSignal synthesize_capture(const ComplexSignal& x, const SceneTruth& truth,
                                        const CaptureOptions& opt = {}) {
  const Eigen::Index t = x.size();
  const double fs = x.sample_rate_hz();
  CVector y = CVector::Zero(t);
  if (opt.clutter) {
    for (const auto& s : truth.clutter) {
      detail::require(s.delay_samples >= 0 && s.delay_samples < t, "synthesize_capture: clutter delay overflow");
      y.tail(t - s.delay_samples) += s.amplitude * x.samples().head(t - s.delay_samples);
    }
  }
  if (opt.targets) {
    for (const auto& tg : truth.targets) {
      detail::require(tg.delay_s >= 0.0 && tg.delay_s * fs < static_cast<double>(t),
                      "synthesize_capture: target delay overflow");
      y += tg.amplitude * fractional_target_replica(x, tg.delay_s, tg.doppler_hz).samples();
    }
  }
  if (opt.noise) y += complex_noise(t, truth.noise_seed);
  return {std::move(y), fs};
}

inline nlohmann::json to_json(const SceneTruth& s) {
  nlohmann::json j;
  j["noise_seed"] = s.noise_seed;
  j["clutter"] = nlohmann::json::array();
  for (const auto& c : s.clutter)
    j["clutter"].push_back({{"delay_samples", c.delay_samples},
                            {"re", c.amplitude.real()},
                            {"im", c.amplitude.imag()},
                            {"rcs_db", c.rcs_db}});
  j["targets"] = nlohmann::json::array();
  for (const auto& t : s.targets)
    j["targets"].push_back({{"delay_s", t.delay_s},
                            {"doppler_hz", t.doppler_hz},
                            {"re", t.amplitude.real()},
                            {"im", t.amplitude.imag()},
                            {"snr_db", t.snr_db}});
  return j;
}

inline SceneTruth scene_from_json(const nlohmann::json& j) {
  SceneTruth s;
  s.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  for (const auto& c : j.at("clutter"))
    s.clutter.push_back({c.at("delay_samples").get<int>(), {c.at("re").get<double>(), c.at("im").get<double>()},
                         c.at("rcs_db").get<double>()});
  for (const auto& t : j.at("targets"))
    s.targets.push_back({t.at("delay_s").get<double>(), t.at("doppler_hz").get<double>(),
                         {t.at("re").get<double>(), t.at("im").get<double>()}, t.at("snr_db").get<double>()});
  return s;
}

}  // namespace ddopt
