#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "covspec/error.hpp"
#include "covspec/pipeline.hpp"
#include "test_support.hpp"

using namespace covspec;
namespace fs = std::filesystem;

namespace {

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "covspec_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_model(const fs::path& dir, const SteinModel& m) {
  const fs::path p = dir / "model.json";
  io::atomic_write(p, io::model_to_json(m));
  return p;
}

SteinModel truth() {
  SteinModel m;
  m.spectrum = {0.3, EvenTrigPoly({0.0, 0.5})};
  m.log_gamma = EvenTrigPoly({-6.0, -0.3});
  m.theta = OddTrigPoly({0.01});
  m.drift = covspec::testing::vec2(1, 0);
  m.power = 1.2;
  return m;
}

// Simulates into dir and returns a config ready for fitting.
RunConfig simulated(const fs::path& dir, const SteinModel& m, std::size_t T, std::uint64_t seed) {
  RunConfig c;
  c.model = write_model(dir, m);
  c.output = dir / "sample.csv";
  c.T = T;
  c.seed = seed;
  c.n_sites = 8;
  c.box_km = 300.0;
  run_simulate(c);
  RunConfig f;
  f.data = dir / "sample.csv";
  f.stations = dir / "sample_stations.csv";
  f.output = dir / "fit";
  f.span = 65;
  f.k1 = 1;
  f.k2 = 1;
  f.k3 = 1;
  f.seed = seed;
  return f;
}

}  // namespace

TEST(RunConfig, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.span = 254;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.display_spans = {4};
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.mask_fraction = 0.5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.k3 = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.k1 = 7;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(RunSimulate, SeedDeterminesOutput) {
  const fs::path dir = workdir("sim");
  RunConfig c;
  c.model = write_model(dir, truth());
  c.T = 64;
  c.seed = 5;
  c.output = dir / "a.csv";
  run_simulate(c);
  c.output = dir / "b.csv";
  run_simulate(c);
  EXPECT_EQ(io::read_text(dir / "a.csv"), io::read_text(dir / "b.csv"));
  EXPECT_EQ(io::read_text(dir / "a.csv").rfind("# seed=5\n", 0), 0u);
  c.seed = 6;
  c.output = dir / "c.csv";
  run_simulate(c);
  EXPECT_NE(io::read_text(dir / "a.csv"), io::read_text(dir / "c.csv"));
}

TEST(RunSimulate, SingleSite) {
  const fs::path dir = workdir("single");
  io::atomic_write(dir / "st.csv", "id,x_km,y_km\nonly,0,0\n");
  RunConfig c;
  c.model = write_model(dir, truth());
  c.stations = dir / "st.csv";
  c.T = 32;
  c.output = dir / "s.csv";
  const auto s = run_simulate(c);
  EXPECT_EQ(s.values.rows(), 1);
  const auto panel = io::read_panel(c.output);
  EXPECT_EQ(panel.station_ids, std::vector<std::string>{"only"});
  EXPECT_EQ(panel.values.cols(), 32);
}

TEST(RunFit, DeterministicAndStageIsolated) {
  const fs::path dir = workdir("fit_det");
  RunConfig f = simulated(dir, truth(), 1024, 3);
  run_fit(f);
  const std::string first = io::read_text(f.output / "report.json");
  f.output = dir / "fit2";
  run_fit(f);
  EXPECT_EQ(io::read_text(f.output / "report.json"), first);

  RunConfig g = f;
  g.data.clear();
  g.stations.clear();
  g.spectra = dir / "fit" / "spectra.csv";
  g.output = dir / "fit3";
  run_fit(g);
  EXPECT_EQ(io::read_text(g.output / "report.json"), first);
  EXPECT_EQ(io::read_text(g.output / "curves.csv"), io::read_text(dir / "fit" / "curves.csv"));

  for (const char* name : {"report.json", "curves.csv", "spectra.csv", "residuals.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "fit" / name)) << name;
  }
  const std::string manifest = io::read_text(dir / "fit" / "manifest.json");
  EXPECT_NE(manifest.find(io::sha256_file(f.data)), std::string::npos);
  EXPECT_NE(manifest.find("\"mask_fraction\""), std::string::npos);
  EXPECT_NE(manifest.find("\"span\": 65"), std::string::npos);
}

TEST(RunFit, RecoversSimulatedModel) {
  const fs::path dir = workdir("fit_rec");
  RunConfig f = simulated(dir, truth(), 2048, 11);
  const FitReport r = run_fit(f);
  EXPECT_NEAR(r.pgamma.p.estimate, 1.2, 0.1);
  EXPECT_NEAR(r.k.beta.estimate, 0.3, 0.15);
  EXPECT_GT(r.drift.v(0), 0.99);
  EXPECT_NEAR(r.theta.b[0].estimate, 0.01, 0.003);
  const SteinModel back = io::model_from_json(io::model_to_json(r.model));
  EXPECT_NEAR(back.power, r.pgamma.p.estimate, 1e-12);
  const std::string text = render_report(io::read_text(f.output / "report.json"));
  EXPECT_NE(text.find("p = "), std::string::npos);
  EXPECT_NE(text.find("drift v"), std::string::npos);
}

TEST(RunFit, SeparableSimulationGivesNullTheta) {
  const fs::path dir = workdir("fit_sep");
  SteinModel m = truth();
  m.theta = OddTrigPoly({0.0});
  RunConfig f = simulated(dir, m, 2048, 21);
  f.k3 = 2;
  const FitReport r = run_fit(f);
  for (const auto& b : r.theta.b) EXPECT_LE(std::abs(b.estimate), 2 * b.se);
}

TEST(RunFit, StageLabelsOnErrors) {
  const fs::path dir = workdir("fit_err");
  RunConfig f;
  f.data = dir / "missing.csv";
  f.stations = dir / "missing_st.csv";
  f.output = dir / "out";
  try {
    run_fit(f);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("ingest:", 0), 0u) << e.what();
  }
}

TEST(RenderReport, RejectsBadJson) { EXPECT_THROW(render_report("{}"), ValidationError); }

#ifdef COVSPEC_CLI_PATH
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(COVSPEC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path dir = workdir("cli");
  write_model(dir, truth());
  const std::string d = dir.string();
  EXPECT_EQ(run_cli("simulate --model " + d + "/model.json -T 256 --sites 4 --seed 1 -o " + d + "/s.csv"), 0);
  EXPECT_EQ(run_cli("fit --data " + d + "/s.csv --stations " + d + "/s_stations.csv --span 31 -o " + d + "/out"), 0);
  EXPECT_EQ(run_cli("report " + d + "/out/report.json"), 0);
  EXPECT_EQ(run_cli("fit --data " + d + "/s.csv --stations " + d + "/s_stations.csv --span 30 -o " + d + "/out"), 2);
  EXPECT_EQ(run_cli("fit --nonsense"), 2);
  io::atomic_write(dir / "line.csv", "id,x_km,y_km\n0,0,0\n1,10,0\n2,20,0\n3,35,0\n");
  EXPECT_EQ(run_cli("fit --data " + d + "/s.csv --stations " + d + "/line.csv --span 31 -o " + d + "/out2"), 3);
}
#endif
