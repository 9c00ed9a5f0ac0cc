#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddopt/ddopt.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kConfig = fs::path(DDOPT_SOURCE_DIR) / "configs" / "desk.toml";

int run(const std::string& args, const std::string& stdout_path = "/dev/null") {
  const std::string cmd = std::string(DDOPT_CLI_PATH) + " " + args + " > " + stdout_path + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddopt_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Small, fast settings layered over the desk config.
const std::string kFast = " --set clutter.count=10 --set waveform.num_symbols=2 ";

}  // namespace

TEST(Cli, SimulateWritesCsvJsonlAndEffectiveConfig) {
  const fs::path out = scratch("sim");
  ASSERT_EQ(run("simulate --config " + kConfig.string() + kFast + "--trials 2 --gamma 0.98 -o " + out.string()), 0);
  const std::string csv = slurp(out / "roc.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "gamma,pfa_tuned,pd,pfa_observed,n_trials,n_targets,n_eligible");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);  // 2 unadapted + 2 adapted rows
  EXPECT_NE(csv.find("\n0.98,0.01,"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "trials.jsonl"));
  const auto eff = ddopt::load_run_config((out / "effective_config.toml").string());
  EXPECT_EQ(eff.experiment.n_trials, 2);
  EXPECT_EQ(eff.experiment.clutter.count, 10);
}

TEST(Cli, SimulateIsByteDeterministic) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(run("simulate --config " + kConfig.string() + kFast + "--trials 2 -o " + a.string()), 0);
  ASSERT_EQ(run("simulate --config " + kConfig.string() + kFast + "--trials 2 --threads 2 -o " + b.string()), 0);
  EXPECT_EQ(slurp(a / "roc.csv"), slurp(b / "roc.csv"));
  EXPECT_EQ(slurp(a / "trials.jsonl"), slurp(b / "trials.jsonl"));
}

TEST(Cli, DumpSurfacesOneTrial) {
  const fs::path out = scratch("dump"), dumps = scratch("dump_dds");
  ASSERT_EQ(run("simulate --config " + kConfig.string() + kFast + "--trials 1 -o " + out.string() +
                " --dump-surfaces " + dumps.string()),
            0);
  int n = 0;
  for (const auto& e : fs::directory_iterator(dumps)) {
    EXPECT_EQ(e.path().extension(), ".dds");
    const auto m = ddopt::read_dds(e.path().string());
    EXPECT_EQ(m.cols(), 63);
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Cli, MissingConfigFailsWithoutOutputs) {
  const fs::path out = scratch("missing");
  EXPECT_EQ(run("simulate --config /nonexistent/run.toml -o " + out.string()), 4);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, ConfigErrorsExitWithConfigCode) {
  const fs::path bad = scratch("bad.toml");
  std::ofstream(bad) << "[clutter]\nbogus = 1\n";
  const fs::path out = scratch("bad_out");
  EXPECT_EQ(run("simulate --config " + bad.string() + " -o " + out.string()), 2);
  EXPECT_EQ(run("simulate --config " + kConfig.string() + " --gamma 1.5 -o " + out.string()), 2);
  EXPECT_EQ(run("simulate --no-such-flag"), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, WaveformCsv) {
  const fs::path out = scratch("wave");
  ASSERT_EQ(run("waveform --profile desk -o " + out.string()), 0);
  const std::string csv = slurp(out / "waveform.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4097);
}

TEST(Cli, SurfaceAdaptedAndUnadapted) {
  const fs::path out = scratch("surface");
  const fs::path log_u = scratch("surface_u.txt"), log_a = scratch("surface_a.txt");
  ASSERT_EQ(run("surface --config " + kConfig.string() + " --mode unadapted --trial 3 -o " + out.string(),
                log_u.string()),
            0);
  ASSERT_EQ(run("surface --config " + kConfig.string() + " --mode adapted --trial 3 -o " + out.string(),
                log_a.string()),
            0);
  EXPECT_NE(slurp(log_u).find("(clutter row)"), std::string::npos);
  const std::string report = slurp(log_a);
  const auto at = report.find("clutter residual ");
  ASSERT_NE(at, std::string::npos);
  EXPECT_LE(std::stod(report.substr(at + 17)), -80.0);

  for (const char* mode : {"unadapted", "adapted"}) {
    const std::string csv = slurp(out / (std::string("surface_") + mode + ".csv"));
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    double max_db = -1e300;
    while (std::getline(is, line)) {
      const std::string v = line.substr(line.rfind(',') + 1);
      if (v != "-inf") max_db = std::max(max_db, std::stod(v));
    }
    EXPECT_EQ(max_db, 0.0) << mode;
    EXPECT_TRUE(fs::exists(out / (std::string("surface_") + mode + ".dds")));
  }
}
