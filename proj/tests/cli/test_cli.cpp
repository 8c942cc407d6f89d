#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxinv/errors.hpp"
#include "fluxinv/formats.hpp"
#include "fluxinv_cli/commands.hpp"
#include "fluxinv_cli/config.hpp"

using namespace fluxinv;
using namespace fluxinv::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("fluxinv_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string small_config(const fs::path& out, int seed) {
  std::ostringstream os;
  os << "[run]\nseed = " << seed << "\noutput_dir = " << out.string() << "\n"
     << "[grid]\nnx = 4\nny = 3\nsplit_lat = 51.7\n"
     << "[simulate]\nT = 20\ntruth = boxcox\nlambda = 0.5\ntau1 = 2\nbeta = 3,2.5\n"
     << "[mcmc]\nchains = 2\niterations = 60\nburn_in = 30\nthin = 3\nthreads = 1\n";
  return os.str();
}

RunConfig parse(const std::string& text) { return parse_config(IniFile::parse(text, "test.ini")); }

}  // namespace

TEST(Config, RequiresSeed) {
  EXPECT_THROW(parse("[run]\nvariant = 2\n"), ConfigError);
  try {
    parse("[run]\nvariant = 2\n");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.seed"), std::string::npos);
  }
}

TEST(Config, UnknownKeysAndBadValuesNameTheKey) {
  try {
    parse("[run]\nseed = 1\n[mcmc]\nchainz = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("mcmc.chainz"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("test.ini:4"), std::string::npos);
  }
  EXPECT_THROW(parse("[run]\nseed = 1\nvariant = 7\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = -1\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = 1\n[mcmc]\niterations = 100\nburn_in = 100\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = 1\n[priors]\na = 1,-1\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = 1\n[simulate]\ntau1 = nan\n"), ConfigError);
}

TEST(Config, DefaultsAndManifest) {
  const auto c = parse("[run]\nseed = 42 # trailing comment\n[mcmc]\nthin = 2\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.gibbs.n_chains, 2);
  EXPECT_EQ(c.gibbs.n_iter, 3000);
  EXPECT_EQ(c.gibbs.thin, 2);
  EXPECT_EQ(c.gibbs.seed, 42u);
  EXPECT_EQ(c.T, 200);
  const std::string m = render_manifest(c);
  EXPECT_NE(m.find(kConfigSchemaVersion), std::string::npos);
  EXPECT_NE(m.find("thin = 2"), std::string::npos);
  // The manifest is itself a valid config that resolves identically.
  EXPECT_EQ(render_manifest(parse(m)), m);
  EXPECT_NE(describe_schema().find("leapfrog_max"), std::string::npos);
}

TEST(Config, SeedOverride) {
  const auto d = scratch("seed");
  const auto p = d / "c.ini";
  std::ofstream(p) << "[run]\nseed = 3\n";
  EXPECT_EQ(load_config(p.string()).seed, 3u);
  EXPECT_EQ(load_config(p.string(), 11).seed, 11u);
  std::ofstream(p) << "[mcmc]\nchains = 1\n";
  EXPECT_THROW(load_config(p.string()), ConfigError);
  EXPECT_EQ(load_config(p.string(), 5).seed, 5u);
}

TEST(Hashing, Fnv1a) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Simulate, DeterministicOutputs) {
  const auto d1 = scratch("sim1");
  const auto d2 = scratch("sim2");
  const auto a = cmd_simulate(parse(small_config(d1 / "out", 9)));
  cmd_simulate(parse(small_config(d2 / "out", 9)));
  for (const char* f : {"observations.csv", "truth_flux.csv", "sensitivities.csv", "heldout.csv", "grid.csv"}) {
    EXPECT_EQ(slurp(d1 / "out" / f), slurp(d2 / "out" / f)) << f;
  }
  EXPECT_EQ(a.n_observations + a.n_heldout, 20u * 4u);
  const auto d3 = scratch("sim3");
  cmd_simulate(parse(small_config(d3 / "out", 10)));
  EXPECT_NE(slurp(d1 / "out" / "observations.csv"), slurp(d3 / "out" / "observations.csv"));
}

TEST(Simulate, FullSizeRun) {
  const auto d = scratch("fullsize");
  std::ostringstream cfg;
  // 122 cells and 4 stations over 1080 time steps.
  cfg << "[run]\nseed = 1\noutput_dir = " << (d / "out").string() << "\n"
      << "[grid]\nnx = 61\nny = 2\n[simulate]\nT = 1080\ntruth = boxcox\nbeta = 3\n";
  const auto r = cmd_simulate(parse(cfg.str()));
  EXPECT_EQ(r.n_observations + r.n_heldout, 4320u);
  const auto st = formats::load_stations((d / "out" / "stations.csv").string());
  const auto obs = formats::load_observations((d / "out" / "observations.csv").string(), st, 1080);
  EXPECT_EQ(obs.size(), r.n_observations);
}

TEST(Pipeline, SimulateInferDiagnose) {
  const auto d = scratch("pipe");
  const auto sim_dir = d / "sim";
  cmd_simulate(parse(small_config(sim_dir, 4)));

  auto infer_config = [&](int variant, const fs::path& out) {
    std::ostringstream os;
    os << "[run]\nseed = 4\nvariant = " << variant << "\noutput_dir = " << out.string() << "\n"
       << "[inputs]\ngrid = " << (sim_dir / "grid.csv").string() << "\nstations = "
       << (sim_dir / "stations.csv").string() << "\nsensitivities = " << (sim_dir / "sensitivities.csv").string()
       << "\nobservations = " << (sim_dir / "observations.csv").string()
       << "\ninventory = " << (sim_dir / "inventory.csv").string() << "\nheldout = "
       << (sim_dir / "heldout.csv").string() << "\nT = 20\n"
       << "[mcmc]\nchains = 2\niterations = 60\nburn_in = 30\nthin = 3\nthreads = 1\n";
    return parse(os.str());
  };

  const auto r1 = cmd_infer(infer_config(1, d / "v1"));
  EXPECT_EQ(r1.retained, 20u);
  EXPECT_EQ(r1.acceptance.size(), 2u);
  const auto p1 = formats::load_param_samples((d / "v1" / "param_samples.csv").string());
  EXPECT_EQ(p1.count("lambda"), 1u);
  EXPECT_EQ(p1.count("theta11"), 1u);

  cmd_infer(infer_config(2, d / "v2"));
  const auto p2 = formats::load_param_samples((d / "v2" / "param_samples.csv").string());
  EXPECT_EQ(p2.count("lambda"), 0u);

  cmd_infer(infer_config(4, d / "v4"));
  const auto p4 = formats::load_param_samples((d / "v4" / "param_samples.csv").string());
  EXPECT_EQ(p4.count("theta11"), 0u);
  EXPECT_EQ(p4.count("theta12"), 0u);
  EXPECT_EQ(p4.count("lambda"), 1u);

  // Summary line is valid JSON with the expected fields.
  const std::string summary = slurp(d / "v1" / "summary.jsonl");
  EXPECT_NE(summary.find("\"input_hash\""), std::string::npos);
  EXPECT_NE(summary.find("\"wall_seconds\""), std::string::npos);

  std::ofstream(d / "masks.csv") << "mask_name,cell_id\nnorth,c9\nnorth,c10\nall,c1\n";
  DiagnoseOptions opt;
  opt.grid = (sim_dir / "grid.csv").string();
  opt.truth = (sim_dir / "truth_flux.csv").string();
  opt.samples_dir = (d / "v1").string();
  opt.stations = (sim_dir / "stations.csv").string();
  opt.heldout = (sim_dir / "heldout.csv").string();
  opt.masks = (d / "masks.csv").string();
  opt.out = (d / "scores.csv").string();
  const auto s = cmd_diagnose(opt);
  EXPECT_GT(s.flux_rmspe, 0.0);
  EXPECT_TRUE(std::isfinite(s.mf_rmspe));
  opt.samples_dir = (d / "v2").string();
  opt.model = "2";
  opt.append = true;
  cmd_diagnose(opt);
  const std::string scores = slurp(d / "scores.csv");
  EXPECT_EQ(scores.substr(0, scores.find('\n')), "model,flux_rmspe,flux_mcrps,mf_rmspe,mf_mcrps");
  EXPECT_EQ(std::count(scores.begin(), scores.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(d / "aggregates.csv"));
}

TEST(Diagnose, TruthRepeatedScoresZero) {
  const auto d = scratch("zero");
  SpatialGrid g;
  g.cell_ids = {"c1", "c2", "c3"};
  g.coords = {{0, 50}, {1, 50}, {2, 50}};
  g.weights = Eigen::Vector3d::Ones();
  g.covariates = Eigen::MatrixXd::Ones(3, 1);
  formats::write_grid((d / "grid.csv").string(), g);
  const Eigen::Vector3d truth(1.5, 2.0, 0.25);
  formats::write_inventory((d / "truth.csv").string(), truth, g);
  Eigen::MatrixXd draws(4, 3);
  draws.rowwise() = truth.transpose();
  {
    std::ofstream out(d / "flux_samples.csv", std::ios::binary);
    formats::write_flux_samples(out, draws, g);
  }
  DiagnoseOptions opt;
  opt.grid = (d / "grid.csv").string();
  opt.truth = (d / "truth.csv").string();
  opt.samples_dir = d.string();
  opt.out = (d / "scores.csv").string();
  const auto r = cmd_diagnose(opt);
  EXPECT_EQ(r.flux_rmspe, 0.0);
  EXPECT_EQ(r.flux_mcrps, 0.0);

  // Samples over a different cell set are rejected.
  SpatialGrid other = g;
  other.cell_ids = {"c1", "c2", "x3"};
  {
    std::ofstream out(d / "flux_samples.csv", std::ios::binary);
    formats::write_flux_samples(out, draws, other);
  }
  EXPECT_THROW(cmd_diagnose(opt), FormatError);
}

TEST(CumulantsDemo, HundredRowSlices) {
  const auto d = scratch("demo");
  const auto files = cmd_cumulants_demo(100, d.string());
  ASSERT_EQ(files.size(), 3u);
  const std::string s = slurp(files[0]);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 101);
  std::istringstream in(s);
  std::string header;
  std::string first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(std::stod(first.substr(0, first.find(','))), -9.9);
}
