#include "fluxinv_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "fluxinv/csv.hpp"
#include "fluxinv/cumulants.hpp"
#include "fluxinv/errors.hpp"
#include "fluxinv/formats.hpp"
#include "fluxinv/osse.hpp"

namespace fs = std::filesystem;

namespace fluxinv::cli {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string(), 0, "cannot open file for writing");
  out << text;
  if (!out) throw FormatError(path.string(), 0, "write failed");
}

SpatialGrid resolve_grid(const RunConfig& cfg) {
  return cfg.grid_path.empty() ? osse::regular_grid(cfg.grid_spec) : formats::load_grid(cfg.grid_path);
}

StationSet resolve_stations(const RunConfig& cfg) {
  if (!cfg.stations_path.empty()) return formats::load_stations(cfg.stations_path);
  StationSet s;
  s.ids = cfg.station_ids;
  for (std::size_t i = 0; i < s.ids.size(); ++i) s.coords.push_back({cfg.station_lons[i], cfg.station_lats[i]});
  s.validate();
  return s;
}

void append_summary(const fs::path& dir, const nlohmann::json& j) {
  std::ofstream out(dir / "summary.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw FormatError((dir / "summary.jsonl").string(), 0, "cannot open file for writing");
  out << j.dump() << "\n";
}

std::vector<std::string> present(std::initializer_list<std::string> paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

}  // namespace

std::uint64_t hash_files(const std::vector<std::string>& paths) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : paths) {
    const std::string bytes = slurp(p);
    h = fnv1a(std::to_string(bytes.size()) + ":", h);
    h = fnv1a(bytes, h);
  }
  return h;
}

SimulateResult cmd_simulate(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  SimulateResult res;
  const SpatialGrid grid = resolve_grid(cfg);
  const StationSet stations = resolve_stations(cfg);
  Rng rng = make_stream(cfg.seed, 0);

  Eigen::VectorXd truth;
  Eigen::VectorXd inventory;
  if (cfg.truth == "inventory") {
    if (cfg.inventory_path.empty()) throw ConfigError("inputs.inventory: required when simulate.truth = inventory");
    truth = formats::load_inventory(cfg.inventory_path, grid);
    inventory = truth;
  } else {
    const osse::BoxCoxFieldSimulator sim(grid, cfg.boxcox);
    truth = sim.draw(rng);
    inventory = cfg.inventory_mode == "truth" ? truth : sim.draw(rng);
  }

  SensitivityStack stack;
  if (!cfg.sensitivities_path.empty()) {
    stack = formats::load_sensitivities(cfg.sensitivities_path, grid, stations, cfg.T);
  } else {
    osse::PlumeParams plume = cfg.plume;
    plume.reference_flux = truth.mean();
    stack = osse::synth_sensitivities(grid, stations, cfg.T, rng, plume);
  }
  osse::Missingness miss;
  miss.fraction = cfg.missing_fraction;
  const auto data = osse::simulate(truth, stack, stations, cfg.disc, cfg.obs_variance, miss, rng);

  formats::MolefractionTable held;
  held.values.resize(static_cast<Eigen::Index>(data.missing.size()));
  for (std::size_t k = 0; k < data.missing.size(); ++k) {
    const auto [t, s] = data.missing[k];
    held.slots.push_back({t, s});
    held.values[static_cast<Eigen::Index>(k)] = data.y2(t, s);
  }

  auto out = [&](const char* name) {
    res.written.push_back((dir / name).string());
    return (dir / name).string();
  };
  formats::write_grid(out("grid.csv"), grid);
  formats::write_stations(out("stations.csv"), stations);
  formats::write_sensitivities(out("sensitivities.csv"), stack, grid, stations);
  formats::write_observations(out("observations.csv"), data.observations, stations);
  formats::write_inventory(out("truth_flux.csv"), truth, grid);
  formats::write_inventory(out("inventory.csv"), inventory, grid);
  formats::write_molefraction(out("heldout.csv"), held, stations);
  write_text(out("manifest.ini"), render_manifest(cfg));
  res.n_observations = data.observations.size();
  res.n_heldout = held.slots.size();

  nlohmann::json j;
  j["command"] = "simulate";
  j["schema"] = kConfigSchemaVersion;
  j["seed"] = cfg.seed;
  j["cells"] = grid.size();
  j["stations"] = stations.size();
  j["T"] = stack.n_time();
  j["observations"] = res.n_observations;
  j["heldout"] = res.n_heldout;
  j["config_hash"] = hex64(fnv1a(render_manifest(cfg)));
  j["input_hash"] = hex64(hash_files(present({cfg.grid_path, cfg.stations_path, cfg.sensitivities_path,
                                                cfg.inventory_path})));
  append_summary(dir, j);
  return res;
}

InferResult cmd_infer(const RunConfig& cfg) {
  if (cfg.sensitivities_path.empty()) throw ConfigError("inputs.sensitivities: required for infer");
  if (cfg.observations_path.empty()) throw ConfigError("inputs.observations: required for infer");
  if (cfg.inventory_path.empty()) throw ConfigError("inputs.inventory: required for infer");
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  const SpatialGrid grid = resolve_grid(cfg);
  const StationSet stations = resolve_stations(cfg);
  SensitivityStack stack = formats::load_sensitivities(cfg.sensitivities_path, grid, stations, cfg.T);
  ObservationSet obs = formats::load_observations(cfg.observations_path, stations, cfg.T);
  Eigen::VectorXd inventory = formats::load_inventory(cfg.inventory_path, grid);
  const auto v = samplers::variant(cfg.variant);
  const HierarchicalModel model(grid, stations, std::move(stack), std::move(obs), std::move(inventory), cfg.bounds,
                                v.correlation);

  samplers::GibbsConfig g = cfg.gibbs;
  g.fixed_lambda = v.fixed_lambda;
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = samplers::run_gibbs(model, g);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  formats::write_samples(samples, grid, dir.string());
  std::size_t n_mf = 0;
  if (!cfg.heldout_path.empty()) {
    const auto held = formats::load_molefraction(cfg.heldout_path, stations);
    Rng rng = make_stream(cfg.seed, 0x6d66ULL);
    const Eigen::MatrixXd draws = osse::posterior_molefraction(samples, model, held.slots, rng, cfg.molefraction_stride);
    formats::write_molefraction_samples((dir / "molefraction_samples.csv").string(), draws, held.slots, stations);
    n_mf = static_cast<std::size_t>(draws.rows());
  }
  write_text(dir / "manifest.ini", render_manifest(cfg));

  InferResult res;
  res.retained = samples.size();
  res.seconds = seconds;
  for (int c = 0; c < samples.n_chains; ++c) res.acceptance.push_back(samples.acceptance_rate(c, g.burn_in));
  res.input_hash = hex64(hash_files(present({cfg.grid_path, cfg.stations_path, cfg.sensitivities_path,
                                              cfg.observations_path, cfg.inventory_path, cfg.heldout_path})));

  nlohmann::json j;
  j["command"] = "infer";
  j["schema"] = kConfigSchemaVersion;
  j["variant"] = cfg.variant;
  j["seed"] = cfg.seed;
  j["chains"] = g.n_chains;
  j["iterations"] = g.n_iter;
  j["burn_in"] = g.burn_in;
  j["thin"] = g.thin;
  j["retained"] = res.retained;
  j["hmc_acceptance_post_burn_in"] = res.acceptance;
  j["final_step_size"] = samples.final_step_size;
  j["molefraction_draws"] = n_mf;
  j["wall_seconds"] = seconds;
  j["threads"] = samplers::resolve_threads(g.threads, g.n_chains);
  j["config_hash"] = hex64(fnv1a(render_manifest(cfg)));
  j["input_hash"] = res.input_hash;
  append_summary(dir, j);
  return res;
}

DiagnoseResult cmd_diagnose(const DiagnoseOptions& opt) {
  if (opt.grid.empty() || opt.truth.empty() || opt.samples_dir.empty()) {
    throw ConfigError("diagnose needs --grid, --truth and --samples");
  }
  const SpatialGrid grid = formats::load_grid(opt.grid);
  const Eigen::VectorXd truth = formats::load_inventory(opt.truth, grid);
  const fs::path sdir(opt.samples_dir);
  const Eigen::MatrixXd flux = formats::load_flux_samples((sdir / "flux_samples.csv").string(), grid);

  DiagnoseResult r;
  r.flux_rmspe = osse::score_rmspe(truth, flux);
  r.flux_mcrps = flux.rows() >= 2 ? osse::score_mcrps(truth, flux) : std::numeric_limits<double>::quiet_NaN();
  r.mf_rmspe = std::numeric_limits<double>::quiet_NaN();
  r.mf_mcrps = r.mf_rmspe;
  if (!opt.heldout.empty()) {
    if (opt.stations.empty()) throw ConfigError("diagnose: --heldout needs --stations");
    const StationSet stations = formats::load_stations(opt.stations);
    const auto held = formats::load_molefraction(opt.heldout, stations);
    const Eigen::MatrixXd mf = formats::load_molefraction_samples((sdir / "molefraction_samples.csv").string(),
                                                                  stations, held.slots);
    r.mf_rmspe = osse::score_rmspe(held.values, mf);
    if (mf.rows() >= 2) r.mf_mcrps = osse::score_mcrps(held.values, mf);
  }

  auto fmt = [](double v) { return std::isnan(v) ? std::string("NA") : csv::format_double(v); };
  const bool header = !opt.append || !fs::exists(opt.out) || fs::file_size(opt.out) == 0;
  {
    std::ofstream out(opt.out, std::ios::binary | (opt.append ? std::ios::app : std::ios::trunc));
    if (!out) throw FormatError(opt.out, 0, "cannot open file for writing");
    csv::Writer w(out);
    if (header) w.row({"model", "flux_rmspe", "flux_mcrps", "mf_rmspe", "mf_mcrps"});
    w.row({opt.model, fmt(r.flux_rmspe), fmt(r.flux_mcrps), fmt(r.mf_rmspe), fmt(r.mf_mcrps)});
  }

  if (!opt.masks.empty()) {
    const auto masks = formats::load_masks(opt.masks, grid);
    const fs::path agg_path = fs::path(opt.out).parent_path() / "aggregates.csv";
    std::ofstream out(agg_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(agg_path.string(), 0, "cannot open file for writing");
    csv::Writer w(out);
    w.row({"model", "mask", "unit", "truth", "median", "lower", "upper"});
    for (const auto& m : masks) {
      for (auto unit : {osse::FluxUnit::grams_per_second, osse::FluxUnit::teragrams_per_year}) {
        const auto a = osse::aggregate_flux(flux, m, grid, unit);
        double t = 0.0;
        for (auto i : osse::resolve_mask(m, grid)) t += truth[i];
        if (unit == osse::FluxUnit::teragrams_per_year) t *= osse::kGramsPerSecondToTgPerYear;
        w.row({opt.model, m.name, unit == osse::FluxUnit::grams_per_second ? "g/s" : "Tg/yr", fmt(t), fmt(a.median),
               fmt(a.lower), fmt(a.upper)});
      }
    }
  }
  return r;
}

std::vector<std::string> cmd_cumulants_demo(long grid_n, const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const auto ex = cumulants::directional_example(grid_n);
  const Eigen::Index n = ex.grid.size();
  auto f = [](double v) { return csv::format_double(v); };
  std::vector<std::string> files;
  {
    const auto p = dir / "slices.csv";
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    csv::Writer w(out);
    w.row({"u", "kernel_at_0", "kappa1_y1", "kappa2_y2y1", "kappa3_y2y1y1_diag", "kappa3_y2y2y2_diag"});
    for (Eigen::Index i = 0; i < n; ++i) {
      w.row({f(ex.grid[i]), f(ex.kernel_at_0[i]), f(ex.y1.kappa1[i]), f(ex.k2_21[i]), f(ex.k3_211(i, i)),
             f(ex.k3_222(i, i))});
    }
    files.push_back(p.string());
  }
  for (const auto& [name, m] : {std::pair<const char*, const Eigen::MatrixXd*>{"kappa3_y2y1y1.csv", &ex.k3_211},
                                {"kappa3_y2y2y2.csv", &ex.k3_222}}) {
    const auto p = dir / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    csv::Writer w(out);
    w.row({"u2", "u3", "value"});
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) w.row({f(ex.grid[i]), f(ex.grid[j]), f((*m)(i, j))});
    files.push_back(p.string());
  }
  return files;
}

}  // namespace fluxinv::cli
