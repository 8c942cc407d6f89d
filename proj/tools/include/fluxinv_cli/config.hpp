#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluxinv/model.hpp"
#include "fluxinv/osse.hpp"
#include "fluxinv/samplers.hpp"

namespace fluxinv::cli {

inline constexpr const char* kConfigSchemaVersion = "fluxinv-config v1";

// Raw `[section]` / `key = value` text. Keys are stored as "section.key".
class IniFile {
 public:
  static IniFile parse(const std::string& text, const std::string& source);
  static IniFile load(const std::string& path);

  const std::string& source() const { return source_; }
  const std::map<std::string, std::string>& values() const { return values_; }
  std::optional<std::string> get(const std::string& key) const;
  int line_of(const std::string& key) const;

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
};

struct KeySpec {
  std::string key;  // section.key
  std::string type;
  std::string default_value;  // empty: no default
  std::string help;
};

// Published schema, in file order.
const std::vector<KeySpec>& config_schema();
std::string describe_schema();

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int variant = 1;

  // Inputs: empty paths mean "not supplied".
  std::string grid_path;
  std::string stations_path;
  std::string sensitivities_path;
  std::string observations_path;
  std::string inventory_path;
  std::string masks_path;
  std::string heldout_path;
  Eigen::Index T = 0;

  // Synthetic layout when no grid/stations file is given.
  osse::RegularGridSpec grid_spec;
  std::vector<std::string> station_ids;
  std::vector<double> station_lons;
  std::vector<double> station_lats;

  // Simulation.
  std::string truth = "inventory";  // inventory | boxcox
  std::string inventory_mode = "truth";  // truth | independent
  osse::BoxCoxFieldSpec boxcox;
  DiscrepancyParams disc{0.01, 0.9, 2.5};
  double obs_variance = 1.0;
  double missing_fraction = 0.1;
  osse::PlumeParams plume;

  samplers::GibbsConfig gibbs;
  PriorBounds bounds;
  std::size_t molefraction_stride = 1;

  // Every key with its resolved value, for manifests.
  std::map<std::string, std::string> resolved;
};

// Validates every key against the schema; unknown keys and malformed values
// raise ConfigError naming the key.
RunConfig parse_config(const IniFile& ini);
RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

std::string render_manifest(const RunConfig& cfg);

}  // namespace fluxinv::cli
