#include "fluxinv_cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fluxinv/csv.hpp"
#include "fluxinv/errors.hpp"

namespace fluxinv::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

IniFile IniFile::parse(const std::string& text, const std::string& source) {
  IniFile ini;
  ini.source_ = source;
  std::stringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(source + ":" + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(line) + ": expected key = value");
    if (section.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": key outside any [section]");
    const std::string key = section + "." + trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    // Trailing comments need whitespace before the marker so values may contain '#'.
    for (const char* marker : {" #", " ;", "\t#", "\t;"}) {
      if (const auto c = value.find(marker); c != std::string::npos) value = trim(value.substr(0, c));
    }
    if (!ini.values_.emplace(key, value).second) {
      throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    ini.lines_[key] = line;
  }
  return ini;
}

IniFile IniFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::optional<std::string> IniFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

int IniFile::line_of(const std::string& key) const {
  const auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"run.seed", "uint", "", "master RNG seed (required)"},
      {"run.output_dir", "path", "out", "directory for all outputs"},
      {"run.variant", "int", "1", "model variant 1..6"},
      {"inputs.grid", "path", "", "grid CSV; otherwise the [grid] section builds a regular grid"},
      {"inputs.stations", "path", "", "stations CSV; otherwise the [stations] section"},
      {"inputs.sensitivities", "path", "", "sensitivities CSV; synthesized by simulate when empty"},
      {"inputs.observations", "path", "", "observations CSV (infer)"},
      {"inputs.inventory", "path", "", "inventory CSV"},
      {"inputs.masks", "path", "", "region masks CSV (optional)"},
      {"inputs.heldout", "path", "", "molefraction CSV of held-out slots to predict (optional)"},
      {"inputs.T", "int", "0", "number of time steps in the sensitivity file"},
      {"grid.nx", "int", "10", "cells along longitude"},
      {"grid.ny", "int", "6", "cells along latitude"},
      {"grid.lon0", "real", "-3", "centre longitude of the first cell"},
      {"grid.lat0", "real", "51", "centre latitude of the first cell"},
      {"grid.dlon", "real", "0.7", "longitude spacing"},
      {"grid.dlat", "real", "0.5", "latitude spacing"},
      {"grid.split_lat", "real?", "", "two-region indicator design split latitude (optional)"},
      {"stations.ids", "list<string>", "s1,s2,s3,s4", "station ids"},
      {"stations.lons", "list<real>", "-1.6,1.2,-0.4,2.9", "station longitudes"},
      {"stations.lats", "list<real>", "51.6,51.4,53.0,52.8", "station latitudes"},
      {"simulate.T", "int", "200", "time steps"},
      {"simulate.truth", "string", "inventory", "inventory | boxcox"},
      {"simulate.inventory", "string", "truth", "truth | independent (boxcox truth only)"},
      {"simulate.theta11", "real", "0.5", "truth correlation decay"},
      {"simulate.theta12", "real", "1.5", "truth correlation smoothness"},
      {"simulate.tau1", "real", "1.5625", "truth transformed-field precision"},
      {"simulate.beta", "list<real>", "3.0,2.3", "truth regression coefficients"},
      {"simulate.lambda", "real", "0", "truth Box-Cox parameter"},
      {"simulate.tau2", "real", "0.01", "discrepancy precision"},
      {"simulate.a", "real", "0.9", "discrepancy AR(1) coefficient"},
      {"simulate.d", "real", "2.5", "discrepancy e-folding length, degrees"},
      {"simulate.obs_variance", "real", "1", "measurement-error variance, ppb^2"},
      {"simulate.missing_fraction", "real", "0.1", "fraction of (t, station) slots held out"},
      {"simulate.target_signal", "real", "50", "mean signal at the mean truth flux, ppb"},
      {"mcmc.chains", "int", "2", "parallel chains"},
      {"mcmc.iterations", "int", "3000", "iterations per chain"},
      {"mcmc.burn_in", "int", "1500", "burn-in iterations"},
      {"mcmc.thin", "int", "1", "thinning interval"},
      {"mcmc.adapt_window", "int", "1000", "HMC step-size adaptation iterations"},
      {"mcmc.step_size", "real", "0.1", "initial HMC step size"},
      {"mcmc.leapfrog_min", "int", "10", "minimum leapfrog steps"},
      {"mcmc.leapfrog_max", "int", "25", "maximum leapfrog steps"},
      {"mcmc.auto_initial_step", "bool", "true", "search a reasonable initial step size"},
      {"mcmc.adapt_mass", "bool", "false", "adapt a diagonal mass matrix in the window"},
      {"mcmc.threads", "int", "0", "worker threads (0: FLUXINV_THREADS or hardware)"},
      {"mcmc.progress", "bool", "false", "progress lines on stderr"},
      {"mcmc.molefraction_stride", "int", "1", "use every k-th draw for held-out mole fractions"},
      {"priors.log_inv_tau2", "interval", "-2,20", "bounds of ln(1/tau2)"},
      {"priors.a", "interval", "-1,1", "bounds of a"},
      {"priors.log_d", "interval", "-2.302585092994046,1.6094379124341003", "bounds of ln d"},
      {"priors.theta11", "interval", "0,2", "bounds of theta11"},
      {"priors.theta12", "interval", "0,2", "bounds of theta12"},
      {"priors.lambda", "interval", "-3,3", "bounds of lambda"},
  };
  return schema;
}

std::string describe_schema() {
  std::ostringstream os;
  os << "Config schema " << kConfigSchemaVersion << " (INI; all keys optional unless noted):\n";
  std::string section;
  for (const auto& k : config_schema()) {
    const std::string sec = k.key.substr(0, k.key.find('.'));
    if (sec != section) {
      os << "  [" << sec << "]\n";
      section = sec;
    }
    os << "    " << k.key.substr(k.key.find('.') + 1) << " (" << k.type << ")";
    if (!k.default_value.empty()) os << " = " << k.default_value;
    os << "  " << k.help << "\n";
  }
  return os.str();
}

namespace {

class Reader {
 public:
  explicit Reader(const IniFile& ini) : ini_(ini) {
    std::set<std::string> known;
    for (const auto& k : config_schema()) known.insert(k.key);
    for (const auto& [key, v] : ini.values()) {
      if (!known.count(key)) fail(key, "unknown key");
    }
    for (const auto& k : config_schema()) {
      const auto v = ini.get(k.key);
      resolved[k.key] = v ? *v : k.default_value;
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const int line = ini_.line_of(key);
    throw ConfigError(ini_.source() + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + key + ": " +
                      what);
  }

  const std::string& raw(const std::string& key) const { return resolved.at(key); }

  std::string str(const std::string& key) const { return raw(key); }

  double real(const std::string& key) const { return to_real(key, raw(key)); }

  long long integer(const std::string& key) const {
    const std::string& s = raw(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) fail(key, "expected an integer, got '" + s + "'");
    return v;
  }

  std::uint64_t uinteger(const std::string& key) const {
    const std::string& s = raw(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      fail(key, "expected a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = raw(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(key, "expected true or false, got '" + s + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& f : split_list(raw(key))) out.push_back(to_real(key, f));
    return out;
  }

  std::vector<std::string> strings(const std::string& key) const {
    auto out = split_list(raw(key));
    for (const auto& s : out) {
      if (s.empty()) fail(key, "empty list element");
    }
    return out;
  }

  Interval interval(const std::string& key) const {
    const auto v = reals(key);
    if (v.size() != 2) fail(key, "expected 'lo,hi'");
    if (!(v[0] < v[1])) fail(key, "interval must satisfy lo < hi");
    return {v[0], v[1]};
  }

  std::map<std::string, std::string> resolved;

 private:
  double to_real(const std::string& key, const std::string& s) const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
      fail(key, "expected a finite number, got '" + s + "'");
    }
    return v;
  }

  const IniFile& ini_;
};

}  // namespace

RunConfig parse_config(const IniFile& ini) {
  const Reader r(ini);
  RunConfig c;
  if (r.raw("run.seed").empty()) r.fail("run.seed", "required key is missing");
  c.seed = r.uinteger("run.seed");
  c.output_dir = r.str("run.output_dir");
  if (c.output_dir.empty()) r.fail("run.output_dir", "must not be empty");
  c.variant = static_cast<int>(r.integer("run.variant"));
  if (c.variant < 1 || c.variant > 6) r.fail("run.variant", "must be in 1..6");

  c.grid_path = r.str("inputs.grid");
  c.stations_path = r.str("inputs.stations");
  c.sensitivities_path = r.str("inputs.sensitivities");
  c.observations_path = r.str("inputs.observations");
  c.inventory_path = r.str("inputs.inventory");
  c.masks_path = r.str("inputs.masks");
  c.heldout_path = r.str("inputs.heldout");
  c.T = static_cast<Eigen::Index>(r.integer("inputs.T"));
  if (c.T < 0) r.fail("inputs.T", "must be >= 0");

  c.grid_spec.nx = static_cast<int>(r.integer("grid.nx"));
  c.grid_spec.ny = static_cast<int>(r.integer("grid.ny"));
  c.grid_spec.lon0 = r.real("grid.lon0");
  c.grid_spec.lat0 = r.real("grid.lat0");
  c.grid_spec.dlon = r.real("grid.dlon");
  c.grid_spec.dlat = r.real("grid.dlat");
  if (!r.raw("grid.split_lat").empty()) c.grid_spec.split_lat = r.real("grid.split_lat");
  if (c.grid_spec.nx < 1 || c.grid_spec.ny < 1) r.fail("grid.nx", "grid dimensions must be >= 1");
  if (!(c.grid_spec.dlon > 0.0 && c.grid_spec.dlat > 0.0)) r.fail("grid.dlon", "grid spacing must be positive");

  c.station_ids = r.strings("stations.ids");
  c.station_lons = r.reals("stations.lons");
  c.station_lats = r.reals("stations.lats");
  if (c.station_lons.size() != c.station_ids.size() || c.station_lats.size() != c.station_ids.size()) {
    r.fail("stations.ids", "ids, lons and lats must have equal length");
  }

  const long long sim_T = r.integer("simulate.T");
  if (sim_T < 1) r.fail("simulate.T", "must be >= 1");
  if (c.T == 0) c.T = static_cast<Eigen::Index>(sim_T);
  c.truth = r.str("simulate.truth");
  if (c.truth != "inventory" && c.truth != "boxcox") r.fail("simulate.truth", "expected 'inventory' or 'boxcox'");
  c.inventory_mode = r.str("simulate.inventory");
  if (c.inventory_mode != "truth" && c.inventory_mode != "independent") {
    r.fail("simulate.inventory", "expected 'truth' or 'independent'");
  }
  c.boxcox.theta1 = {r.real("simulate.theta11"), r.real("simulate.theta12")};
  c.boxcox.tau1 = r.real("simulate.tau1");
  const auto beta = r.reals("simulate.beta");
  c.boxcox.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  c.boxcox.lambda = r.real("simulate.lambda");
  if (!(c.boxcox.tau1 > 0.0)) r.fail("simulate.tau1", "must be positive");
  c.disc = {r.real("simulate.tau2"), r.real("simulate.a"), r.real("simulate.d")};
  try {
    covariance::validate(c.disc);
  } catch (const Error& e) {
    r.fail("simulate.tau2", e.what());
  }
  c.obs_variance = r.real("simulate.obs_variance");
  if (!(c.obs_variance > 0.0)) r.fail("simulate.obs_variance", "must be positive");
  c.missing_fraction = r.real("simulate.missing_fraction");
  if (c.missing_fraction < 0.0 || c.missing_fraction >= 1.0) r.fail("simulate.missing_fraction", "must be in [0, 1)");
  c.plume.target_signal = r.real("simulate.target_signal");
  if (!(c.plume.target_signal > 0.0)) r.fail("simulate.target_signal", "must be positive");

  auto& g = c.gibbs;
  g.n_chains = static_cast<int>(r.integer("mcmc.chains"));
  g.n_iter = r.integer("mcmc.iterations");
  g.burn_in = r.integer("mcmc.burn_in");
  g.thin = r.integer("mcmc.thin");
  g.seed = c.seed;
  g.hmc.adapt_window = static_cast<int>(r.integer("mcmc.adapt_window"));
  g.hmc.step_size = r.real("mcmc.step_size");
  g.hmc.leapfrog_min = static_cast<int>(r.integer("mcmc.leapfrog_min"));
  g.hmc.leapfrog_max = static_cast<int>(r.integer("mcmc.leapfrog_max"));
  g.auto_initial_step = r.boolean("mcmc.auto_initial_step");
  g.adapt_mass = r.boolean("mcmc.adapt_mass");
  g.threads = static_cast<int>(r.integer("mcmc.threads"));
  g.progress = r.boolean("mcmc.progress");
  const long long stride = r.integer("mcmc.molefraction_stride");
  if (stride < 1) r.fail("mcmc.molefraction_stride", "must be >= 1");
  c.molefraction_stride = static_cast<std::size_t>(stride);
  try {
    g.validate();
  } catch (const Error& e) {
    r.fail("mcmc.iterations", e.what());
  }

  c.bounds.log_inv_tau2 = r.interval("priors.log_inv_tau2");
  c.bounds.a = r.interval("priors.a");
  c.bounds.log_d = r.interval("priors.log_d");
  c.bounds.theta11 = r.interval("priors.theta11");
  c.bounds.theta12 = r.interval("priors.theta12");
  c.bounds.lambda = r.interval("priors.lambda");
  try {
    c.bounds.validate();
  } catch (const Error& e) {
    r.fail("priors.a", e.what());
  }
  c.resolved = r.resolved;
  c.resolved["run.seed"] = std::to_string(c.seed);
  return c;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  IniFile ini = IniFile::load(path);
  if (seed_override) {
    // Re-parse with the override so the manifest records the effective seed.
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    std::ostringstream patched;
    std::stringstream lines(text);
    std::string line;
    std::string section;
    bool done = false;
    while (std::getline(lines, line)) {
      const std::string t = trim(line);
      if (!t.empty() && t.front() == '[' && t.back() == ']') section = trim(t.substr(1, t.size() - 2));
      const auto eq = t.find('=');
      if (section == "run" && eq != std::string::npos && trim(t.substr(0, eq)) == "seed") {
        patched << "seed = " << *seed_override << "\n";
        done = true;
        continue;
      }
      patched << line << "\n";
    }
    if (!done) patched << "\n[run]\nseed = " << *seed_override << "\n";
    ini = IniFile::parse(patched.str(), path);
  }
  return parse_config(ini);
}

std::string render_manifest(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# " << kConfigSchemaVersion << " resolved configuration\n";
  std::string section;
  for (const auto& k : config_schema()) {
    const std::string sec = k.key.substr(0, k.key.find('.'));
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << k.key.substr(k.key.find('.') + 1) << " = " << cfg.resolved.at(k.key) << "\n";
  }
  return os.str();
}

}  // namespace fluxinv::cli
