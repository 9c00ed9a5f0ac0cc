#pragma once

// Batched Monte Carlo over seeded trials. One fixed reference per
// experiment; its Gram blocks and every factorized adapted filter are
// built once and then shared read-only by all trials.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ddopt/adaptive.hpp"
#include "ddopt/caf.hpp"
#include "ddopt/detection.hpp"
#include "ddopt/grid.hpp"
#include "ddopt/rng.hpp"
#include "ddopt/scene.hpp"
#include "ddopt/signal.hpp"

namespace ddopt {

enum class Pipeline { unadapted, adapted, both };

struct ExperimentConfig {
  OfdmConfig waveform;
  GridConfig grid;
  ClutterParams clutter;
  TargetParams target;
  CfarConfig cfar;  // pfa is taken from pfa_list
  ScoringConfig scoring;
  std::vector<double> gamma_list{0.98};
  std::vector<double> pfa_list{1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12};
  int n_trials = 10000;
  std::uint64_t base_seed = 1;
  Pipeline pipeline = Pipeline::both;
  double ridge = 0.0;
  /// Build Gram blocks and filters once per experiment. When false they are
  /// rebuilt inside every trial; results must not change.
  bool gram_cache = true;
  /// 0 = DDOPT_THREADS environment variable, else hardware concurrency.
  int threads = 0;

  bool runs_unadapted() const { return pipeline != Pipeline::adapted; }
  bool runs_adapted() const { return pipeline != Pipeline::unadapted; }

  void validate() const {
    detail::require(n_trials >= 1, "ExperimentConfig: n_trials must be >= 1");
    detail::require(!pfa_list.empty(), "ExperimentConfig: pfa_list is empty");
    for (double p : pfa_list) detail::require(p > 0.0 && p < 1.0, "ExperimentConfig: every pfa must lie in (0, 1)");
    if (runs_adapted()) {
      detail::require(!gamma_list.empty(), "ExperimentConfig: gamma_list is empty");
      for (double g : gamma_list)
        detail::require(g > 0.0 && g <= 1.0, "ExperimentConfig: every gamma must lie in (0, 1]");
    }
    detail::require(threads >= 0, "ExperimentConfig: threads must be nonnegative");
    detail::require(waveform.sample_rate_hz > 0.0, "ExperimentConfig: sample rate must be positive");
  }
};

/// Reduced-scale profile: T = 4096 at 15.36 MHz, Doppler bins of fs/T with
/// targets 3..13 bins off zero, 50 clutter scatterers, 200 trials.
inline ExperimentConfig desk_profile() {
  ExperimentConfig cfg;
  cfg.waveform.num_subcarriers = 480;
  cfg.waveform.cp_length = 32;
  cfg.waveform.num_symbols = 8;
  cfg.waveform.active_subcarrier_fraction = 600.0 / 1024.0;
  cfg.waveform.sample_rate_hz = 15.36e6;
  const double step = cfg.waveform.sample_rate_hz / static_cast<double>(cfg.waveform.length());
  cfg.grid.doppler_step_hz = step;
  cfg.grid.doppler_min_hz = 3.0 * step;
  cfg.grid.doppler_max_hz = 16.0 * step;
  cfg.target.doppler_abs_min_hz = 3.0 * step;
  cfg.target.doppler_abs_max_hz = 13.0 * step;
  cfg.clutter.count = 50;
  cfg.clutter.rcs_mean_db = 15.0;
  cfg.gamma_list = {0.98};
  cfg.pfa_list = {1e-2, 1e-4};
  cfg.n_trials = 200;
  cfg.base_seed = 2026;
  return cfg;
}

/// One row of Monte Carlo aggregates for a (pipeline, gamma, pfa) triple.
struct RocRow {
  std::optional<double> gamma;  // empty for the unadapted pipeline
  double pfa_tuned = 0.0;
  double pd = 0.0;
  double pfa_observed = 0.0;
  long n_trials = 0;
  long n_targets = 0;
  long n_detected = 0;
  long n_eligible = 0;
  long n_false_alarms = 0;
  friend bool operator==(const RocRow&, const RocRow&) = default;
};

struct RocTable {
  std::vector<RocRow> rows;
  long failed_trials = 0;

  const RocRow* find(std::optional<double> gamma, double pfa) const {
    for (const auto& r : rows)
      if (r.gamma == gamma && r.pfa_tuned == pfa) return &r;
    return nullptr;
  }
};

/// Per-trial scores; scores[p][k] is pipeline p (unadapted first if run,
/// then each gamma) at pfa_list[k].
struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::string error;
  std::vector<std::vector<TrialScore>> scores;
  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

struct TrialSurfaces {
  SceneTruth truth;
  DDSurface unadapted;               // classical CAF over the full lattice
  std::vector<DDSurface> adapted;    // one per gamma, clutter cells zero
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DDOPT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg)
      : cfg_(std::move(cfg)),
        reference_(generate_ofdm_reference(cfg_.waveform)),
        grid_(build_default_grid(cfg_.waveform.sample_rate_hz, cfg_.grid)) {
    cfg_.validate();
    grid_.check_fits(reference_.size());
    if (cfg_.runs_adapted() && cfg_.gram_cache) filters_ = build_filters();
  }

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const ComplexSignal& reference() const noexcept { return reference_; }
  const DDGrid& grid() const noexcept { return grid_; }
  double sample_rate() const noexcept { return reference_.sample_rate_hz(); }

  std::uint64_t trial_seed(int index) const {
    return derive_seed(cfg_.base_seed, 0x545249414cULL, static_cast<std::uint64_t>(index));
  }

  std::size_t num_pipelines() const {
    return (cfg_.runs_unadapted() ? 1u : 0u) + (cfg_.runs_adapted() ? cfg_.gamma_list.size() : 0u);
  }

  /// Gamma of pipeline slot p (empty for the unadapted slot).
  std::optional<double> pipeline_gamma(std::size_t p) const {
    if (cfg_.runs_unadapted()) {
      if (p == 0) return std::nullopt;
      --p;
    }
    return cfg_.gamma_list.at(p);
  }

  /// Adapted filter for gamma_list[k] (the cached one when caching is on).
  std::shared_ptr<const AdaptedFilter> filter(std::size_t k) const {
    return cfg_.gram_cache && !filters_.empty() ? filters_.at(k) : build_filters().at(k);
  }

  TrialSurfaces surfaces(int index) const { return surfaces_for(sample_trial_scene(index)); }

  SceneTruth sample_trial_scene(int index) const {
    return sample_scene(cfg_.clutter, cfg_.target, sample_rate(), trial_seed(index));
  }

  TrialSurfaces surfaces_for(const SceneTruth& truth) const {
    TrialSurfaces out;
    out.truth = truth;
    const ComplexSignal y = synthesize_capture(reference_, out.truth);
    out.unadapted = classical_caf(reference_, y, grid_);
    if (cfg_.runs_adapted()) {
      const auto filters = cfg_.gram_cache ? filters_ : build_filters();
      const CrossCorrelations r = cross_correlations(out.unadapted, grid_);
      for (const auto& f : filters) out.adapted.push_back(surface_from_columns(f->apply(r), grid_));
    }
    return out;
  }

  TrialResult run_trial(int index) const {
    TrialResult res;
    res.index = index;
    res.seed = trial_seed(index);
    try {
      const TrialSurfaces s = surfaces(index);
      if (cfg_.runs_unadapted()) res.scores.push_back(score_surface(s.unadapted, s.truth));
      for (const auto& a : s.adapted) res.scores.push_back(score_surface(a, s.truth));
    } catch (const std::exception& e) {
      res.error = e.what();
      res.scores.clear();
    }
    return res;
  }

  /// Runs trials [0, n_trials) on a shared atomic work counter. Results are
  /// stored by index, so the output does not depend on completion order.
  std::vector<TrialResult> run_trials(const std::function<void(int)>& progress = {}) const {
    std::vector<TrialResult> results(static_cast<std::size_t>(cfg_.n_trials));
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    auto worker = [&] {
      for (int i = next.fetch_add(1); i < cfg_.n_trials; i = next.fetch_add(1)) {
        results[static_cast<std::size_t>(i)] = run_trial(i);
        const int d = done.fetch_add(1) + 1;
        if (progress) progress(d);
      }
    };
    const int n = std::min(resolve_threads(cfg_.threads), cfg_.n_trials);
    if (n <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    return results;
  }

  RocTable aggregate(const std::vector<TrialResult>& results) const {
    RocTable table;
    const std::size_t np = num_pipelines();
    const std::size_t nk = cfg_.pfa_list.size();
    std::vector<RocRow> acc(np * nk);
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t k = 0; k < nk; ++k) {
        acc[p * nk + k].gamma = pipeline_gamma(p);
        acc[p * nk + k].pfa_tuned = cfg_.pfa_list[k];
      }
    for (const auto& r : results) {
      if (!r.error.empty()) {
        ++table.failed_trials;
        continue;
      }
      for (std::size_t p = 0; p < np; ++p)
        for (std::size_t k = 0; k < nk; ++k) {
          const TrialScore& s = r.scores[p][k];
          RocRow& row = acc[p * nk + k];
          ++row.n_trials;
          row.n_targets += static_cast<long>(s.detected.size());
          row.n_detected += s.detections();
          row.n_eligible += s.eligible_cells;
          row.n_false_alarms += s.false_alarm_cells;
        }
    }
    for (auto& row : acc) {
      row.pd = row.n_targets > 0 ? static_cast<double>(row.n_detected) / static_cast<double>(row.n_targets) : 0.0;
      row.pfa_observed =
          row.n_eligible > 0 ? static_cast<double>(row.n_false_alarms) / static_cast<double>(row.n_eligible) : 0.0;
    }
    table.rows = std::move(acc);
    return table;
  }

 private:
  std::vector<std::shared_ptr<const AdaptedFilter>> build_filters() const {
    auto blocks = std::make_shared<const GramBlocks>(compute_gram_blocks(reference_, grid_));
    std::vector<std::shared_ptr<const AdaptedFilter>> out;
    for (double g : cfg_.gamma_list)
      out.push_back(std::make_shared<const AdaptedFilter>(blocks, GammaWeights::reduced(g), cfg_.ridge));
    return out;
  }

  std::vector<TrialScore> score_surface(const DDSurface& s, const SceneTruth& truth) const {
    const Eigen::MatrixXd power = detection_power(s, grid_);
    std::vector<TrialScore> out;
    for (double pfa : cfg_.pfa_list) {
      CfarConfig c = cfg_.cfar;
      c.pfa = pfa;
      out.push_back(score_trial(ca_cfar(power, c), truth, grid_, sample_rate(), cfg_.scoring));
    }
    return out;
  }

  ExperimentConfig cfg_;
  ComplexSignal reference_;
  DDGrid grid_;
  std::vector<std::shared_ptr<const AdaptedFilter>> filters_;
};

inline RocTable run_montecarlo(const ExperimentConfig& cfg) {
  const Experiment exp(cfg);
  return exp.aggregate(exp.run_trials());
}

// Output formats.

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline constexpr const char* kRocCsvHeader = "gamma,pfa_tuned,pd,pfa_observed,n_trials,n_targets,n_eligible";

/// Unadapted rows carry the literal `unadapted` in the gamma column.
inline void write_roc_csv(std::ostream& os, const RocTable& t) {
  os << kRocCsvHeader << '\n';
  for (const auto& r : t.rows) {
    os << (r.gamma ? format_number(*r.gamma) : std::string("unadapted")) << ',' << format_number(r.pfa_tuned) << ','
       << format_number(r.pd) << ',' << format_number(r.pfa_observed) << ',' << r.n_trials << ',' << r.n_targets
       << ',' << r.n_eligible << '\n';
  }
}

inline nlohmann::json trial_to_json(const TrialResult& r, const Experiment& exp) {
  nlohmann::json j;
  j["trial"] = r.index;
  j["seed"] = r.seed;
  j["error"] = r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error);
  j["scores"] = nlohmann::json::array();
  for (std::size_t p = 0; p < r.scores.size(); ++p) {
    const auto g = exp.pipeline_gamma(p);
    for (std::size_t k = 0; k < r.scores[p].size(); ++k) {
      const TrialScore& s = r.scores[p][k];
      j["scores"].push_back({{"pipeline", g ? "adapted" : "unadapted"},
                             {"gamma", g ? nlohmann::json(*g) : nlohmann::json(nullptr)},
                             {"pfa_tuned", exp.config().pfa_list[k]},
                             {"detected", s.detected},
                             {"false_alarm_cells", s.false_alarm_cells},
                             {"eligible_cells", s.eligible_cells},
                             {"flagged_target_cells", s.flagged_target_cells},
                             {"flagged_excluded_cells", s.flagged_excluded_cells}});
    }
  }
  return j;
}

inline void write_trials_jsonl(std::ostream& os, const std::vector<TrialResult>& results, const Experiment& exp) {
  for (const auto& r : results) os << trial_to_json(r, exp).dump() << '\n';
}

}  // namespace ddopt
