// ddopt: waveform synthesis, single-trial surfaces, Monte Carlo runs and
// gamma sweeps driven by a run config file.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddopt/ddopt.hpp"

namespace fs = std::filesystem;
using namespace ddopt;

namespace {

enum Exit : int { ok = 0, config_error = 2, numeric_error = 3, io_error = 4 };

struct CommonArgs {
  std::string config;
  std::string profile = "full";
  std::string out;
  std::vector<std::string> sets;
  std::vector<double> gammas;
  std::vector<double> pfas;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "Run config file");
  cmd->add_option("--profile", a.profile, "Base defaults before the config file")
      ->check(CLI::IsMember({"full", "desk"}));
  cmd->add_option("-o,--out", a.out, "Output directory (overrides output.dir)");
  cmd->add_option("--set", a.sets, "Override one key: section.key=value");
  cmd->add_option("--seed", a.seed, "Base seed");
  cmd->add_option("--gamma", a.gammas, "Gamma value(s)")->delimiter(',');
  cmd->add_option("--pfa", a.pfas, "Tuned false-alarm rate(s)")->delimiter(',');
  cmd->add_option("--trials", a.trials, "Number of trials");
  cmd->add_option("--threads", a.threads, "Worker threads (0: DDOPT_THREADS or all cores)");
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig c;
  if (a.profile == "desk") c.experiment = desk_profile();
  if (!a.config.empty()) c = load_run_config(a.config, c);
  for (const auto& s : a.sets) apply_override(c, s);
  if (a.seed) c.experiment.base_seed = *a.seed;
  if (!a.gammas.empty()) c.experiment.gamma_list = a.gammas;
  if (!a.pfas.empty()) c.experiment.pfa_list = a.pfas;
  if (a.trials) c.experiment.n_trials = *a.trials;
  if (a.threads) c.experiment.threads = *a.threads;
  if (!a.out.empty()) c.output.dir = a.out;
  c.experiment.validate();
  return c;
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed: " + p.string());
}

std::string gamma_tag(double g) { return "g" + format_number(g); }

void print_table(const RocTable& t) {
  std::printf("%-10s %-10s %-8s %-12s %s\n", "gamma", "pfa", "pd", "pfa_obs", "trials");
  for (const auto& r : t.rows)
    std::printf("%-10s %-10s %-8.4f %-12.4g %ld\n", r.gamma ? format_number(*r.gamma).c_str() : "unadapted",
                format_number(r.pfa_tuned).c_str(), r.pd, r.pfa_observed, r.n_trials);
  if (t.failed_trials > 0) std::printf("failed trials: %ld\n", t.failed_trials);
}

// Everything is computed before the first file is written, so a failed run
// leaves no partial outputs behind.
int run_batch(const RunConfig& c, const std::string& csv_name, bool quiet) {
  const Experiment exp(c.experiment);
  const auto results = exp.run_trials();
  const RocTable table = exp.aggregate(results);

  std::ostringstream csv, jsonl;
  write_roc_csv(csv, table);
  write_trials_jsonl(jsonl, results, exp);

  const fs::path dir = ensure_dir(c.output.dir);
  write_text(dir / csv_name, csv.str());
  write_text(dir / "trials.jsonl", jsonl.str());
  write_text(dir / "effective_config.toml", serialize_run_config(c));

  if (!c.output.dump_surfaces.empty()) {
    const fs::path sdir = ensure_dir(c.output.dump_surfaces);
    for (int i = 0; i < c.experiment.n_trials; ++i) {
      const TrialSurfaces s = exp.surfaces(i);
      const std::string stem = "trial" + std::to_string(i) + "_";
      if (c.experiment.runs_unadapted()) write_dds((sdir / (stem + "unadapted.dds")).string(), s.unadapted.values);
      for (std::size_t k = 0; k < s.adapted.size(); ++k)
        write_dds((sdir / (stem + "adapted_" + gamma_tag(c.experiment.gamma_list[k]) + ".dds")).string(),
                  s.adapted[k].values);
    }
  }
  if (!quiet) print_table(table);
  return table.failed_trials == 0 ? ok : numeric_error;
}

int cmd_waveform(const CommonArgs& a) {
  const RunConfig c = resolve(a);
  const ComplexSignal x = generate_ofdm_reference(c.experiment.waveform);
  std::ostringstream csv;
  csv << "n,re,im\n";
  for (Eigen::Index n = 0; n < x.size(); ++n)
    csv << n << ',' << format_number(x[n].real()) << ',' << format_number(x[n].imag()) << '\n';
  const fs::path dir = ensure_dir(c.output.dir);
  write_text(dir / "waveform.csv", csv.str());
  write_text(dir / "effective_config.toml", serialize_run_config(c));
  std::printf("samples %lld  active subcarriers %d  mean power %.12f  fs %.6g Hz\n",
              static_cast<long long>(x.size()), c.experiment.waveform.active_subcarriers(), x.mean_power(),
              x.sample_rate_hz());
  return ok;
}

int cmd_surface(const CommonArgs& a, const std::string& mode, int trial) {
  RunConfig c = resolve(a);
  if (mode == "adapted") {
    c.experiment.pipeline = Pipeline::adapted;
    c.experiment.gamma_list.resize(1);
  } else {
    c.experiment.pipeline = Pipeline::unadapted;
  }
  const Experiment exp(c.experiment);
  const DDGrid& grid = exp.grid();
  const SceneTruth truth = exp.sample_trial_scene(trial);
  const TrialSurfaces s = exp.surfaces_for(truth);
  const DDSurface& raw = mode == "adapted" ? s.adapted.at(0) : s.unadapted;

  // Response to the noise-free clutter alone, through the same pipeline.
  const ComplexSignal clutter_only =
      synthesize_capture(exp.reference(), truth, CaptureOptions{.clutter = true, .targets = false, .noise = false});
  DDSurface residual = classical_caf(exp.reference(), clutter_only, grid);
  if (mode == "adapted") {
    residual = surface_from_columns(exp.filter(0)->apply(cross_correlations(residual, grid)), grid);
  }

  Eigen::Index pr = 0, pc = 0;
  const double peak = raw.values.cwiseAbs2().maxCoeff(&pr, &pc);
  const double resid_db = 10.0 * std::log10(residual.power().maxCoeff() / peak);

  // dB relative to the peak cell, which is therefore exactly 0
  const Eigen::MatrixXd power = raw.power();
  std::ostringstream csv;
  csv << "doppler_hz,delay_bin,db\n";
  for (int r = 0; r < grid.rows(); ++r)
    for (int col = 0; col < grid.cols(); ++col) {
      const double p = power(r, col) / peak;
      csv << format_number(grid.doppler_bins_hz()[static_cast<std::size_t>(r)]) << ','
          << grid.delay_bins()[static_cast<std::size_t>(col)] << ','
          << (p > 0.0 ? format_number(10.0 * std::log10(p)) : std::string("-inf")) << '\n';
    }

  const fs::path dir = ensure_dir(c.output.dir);
  write_text(dir / ("surface_" + mode + ".csv"), csv.str());
  write_dds((dir / ("surface_" + mode + ".dds")).string(), raw.values);
  write_text(dir / ("scene_" + std::to_string(trial) + ".json"), to_json(truth).dump(2) + "\n");
  write_text(dir / "effective_config.toml", serialize_run_config(c));

  const Cell pk{static_cast<int>(pr), static_cast<int>(pc)};
  std::printf("mode %s  peak at doppler %.6g Hz, delay bin %d%s\n", mode.c_str(), grid.doppler_of(pk),
              grid.delay_of(pk), grid.is_clutter(pk) ? " (clutter row)" : "");
  std::printf("clutter residual %.2f dB relative to peak\n", resid_db);
  for (const auto& t : truth.targets)
    std::printf("target doppler %.6g Hz, delay %.4g us, snr %.2f dB\n", t.doppler_hz, t.delay_s * 1e6, t.snr_db);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive delay-Doppler processing for passive radar"};
  app.require_subcommand(1);

  CommonArgs wa, sa, ma, swa;
  auto* waveform = app.add_subcommand("waveform", "Synthesize the reference waveform to CSV");
  add_common(waveform, wa);

  auto* surface = app.add_subcommand("surface", "One trial, one surface: CSV/DDS1 export and peak report");
  add_common(surface, sa);
  std::string mode = "adapted";
  int trial = 0;
  surface->add_option("--mode", mode, "adapted or unadapted")->check(CLI::IsMember({"adapted", "unadapted"}));
  surface->add_option("--trial", trial, "Trial index under the base seed")->check(CLI::NonNegativeNumber);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run: roc.csv, trials.jsonl");
  add_common(simulate, ma);
  std::string dump;
  simulate->add_option("--dump-surfaces", dump, "Directory for per-trial DDS1 surfaces");

  auto* sweep = app.add_subcommand("sweep", "Gamma sweep (default 0.5, 0.9, 0.98, 1): sweep.csv");
  add_common(sweep, swa);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config_error;
  }

  try {
    if (*waveform) return cmd_waveform(wa);
    if (*surface) return cmd_surface(sa, mode, trial);
    if (*simulate) {
      RunConfig c = resolve(ma);
      if (!dump.empty()) c.output.dump_surfaces = dump;
      return run_batch(c, "roc.csv", false);
    }
    if (*sweep) {
      CommonArgs a = swa;
      if (a.gammas.empty()) a.gammas = {0.5, 0.9, 0.98, 1.0};
      return run_batch(resolve(a), "sweep.csv", false);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return config_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return numeric_error;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return io_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return numeric_error;
  }
  return ok;
}
