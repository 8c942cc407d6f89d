#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fluxinv/model.hpp"
#include "fluxinv/osse.hpp"
#include "fluxinv/samplers.hpp"

namespace fluxinv::formats {

// Schema ids written on the first line as `# schema: <id> v1`.
inline constexpr const char* kGridSchema = "grid";
inline constexpr const char* kStationsSchema = "stations";
inline constexpr const char* kSensitivitiesSchema = "sensitivities";
inline constexpr const char* kObservationsSchema = "observations";
inline constexpr const char* kInventorySchema = "inventory";
inline constexpr const char* kMasksSchema = "masks";
inline constexpr const char* kFluxSamplesSchema = "flux_samples";
inline constexpr const char* kParamSamplesSchema = "param_samples";
inline constexpr const char* kMolefractionSchema = "molefraction";
inline constexpr const char* kMolefractionSamplesSchema = "molefraction_samples";

// Every loader has a stream form (for tests) and a path form. Malformed input
// raises FormatError with the source name and 1-based line number.

// cell_id,lon,lat,weight,x1[,x2,...]
SpatialGrid read_grid(std::istream& in, const std::string& source);
SpatialGrid load_grid(const std::string& path);
void write_grid(std::ostream& out, const SpatialGrid& grid);
void write_grid(const std::string& path, const SpatialGrid& grid);

// station_id,lon,lat
StationSet read_stations(std::istream& in, const std::string& source);
StationSet load_stations(const std::string& path);
void write_stations(std::ostream& out, const StationSet& stations);
void write_stations(const std::string& path, const StationSet& stations);

// t,station_id,cell_id,value with t in 1..T; absent triples are zero.
SensitivityStack read_sensitivities(std::istream& in, const std::string& source, const SpatialGrid& grid,
                                    const StationSet& stations, Eigen::Index T);
SensitivityStack load_sensitivities(const std::string& path, const SpatialGrid& grid, const StationSet& stations,
                                    Eigen::Index T);
void write_sensitivities(std::ostream& out, const SensitivityStack& stack, const SpatialGrid& grid,
                         const StationSet& stations);
void write_sensitivities(const std::string& path, const SensitivityStack& stack, const SpatialGrid& grid,
                         const StationSet& stations);

// t,station_id,value,variance; absent (t, station) pairs are unobserved. T <= 0 skips the range check.
ObservationSet read_observations(std::istream& in, const std::string& source, const StationSet& stations,
                                 Eigen::Index T = 0);
ObservationSet load_observations(const std::string& path, const StationSet& stations, Eigen::Index T = 0);
void write_observations(std::ostream& out, const ObservationSet& obs, const StationSet& stations);
void write_observations(const std::string& path, const ObservationSet& obs, const StationSet& stations);

// cell_id,flux; every grid cell exactly once, fluxes > 0.
Eigen::VectorXd read_inventory(std::istream& in, const std::string& source, const SpatialGrid& grid);
Eigen::VectorXd load_inventory(const std::string& path, const SpatialGrid& grid);
void write_inventory(std::ostream& out, const Eigen::VectorXd& flux, const SpatialGrid& grid);
void write_inventory(const std::string& path, const Eigen::VectorXd& flux, const SpatialGrid& grid);

// mask_name,cell_id; masks keep first-appearance order.
std::vector<osse::RegionMask> read_masks(std::istream& in, const std::string& source, const SpatialGrid& grid);
std::vector<osse::RegionMask> load_masks(const std::string& path, const SpatialGrid& grid);
void write_masks(std::ostream& out, const std::vector<osse::RegionMask>& masks);
void write_masks(const std::string& path, const std::vector<osse::RegionMask>& masks);

// draw,cell_id,value (draw 1-based) -> draws x cells.
Eigen::MatrixXd read_flux_samples(std::istream& in, const std::string& source, const SpatialGrid& grid);
Eigen::MatrixXd load_flux_samples(const std::string& path, const SpatialGrid& grid);
void write_flux_samples(std::ostream& out, const Eigen::MatrixXd& flux, const SpatialGrid& grid);

// draw,name,value -> name -> per-draw values.
std::map<std::string, std::vector<double>> read_param_samples(std::istream& in, const std::string& source);
std::map<std::string, std::vector<double>> load_param_samples(const std::string& path);
void write_param_samples(std::ostream& out, const samplers::PosteriorSamples& samples);

// Writes flux_samples.csv and param_samples.csv into `dir` (created if needed).
void write_samples(const samplers::PosteriorSamples& samples, const SpatialGrid& grid, const std::string& dir);

// t,station_id,value: true mole fractions at (typically held-out) slots.
struct MolefractionTable {
  std::vector<osse::Slot> slots;
  Eigen::VectorXd values;
};
MolefractionTable read_molefraction(std::istream& in, const std::string& source, const StationSet& stations);
MolefractionTable load_molefraction(const std::string& path, const StationSet& stations);
void write_molefraction(std::ostream& out, const MolefractionTable& table, const StationSet& stations);
void write_molefraction(const std::string& path, const MolefractionTable& table, const StationSet& stations);

// draw,t,station_id,value -> draws x slots, aligned to `slots`.
Eigen::MatrixXd read_molefraction_samples(std::istream& in, const std::string& source, const StationSet& stations,
                                          const std::vector<osse::Slot>& slots);
Eigen::MatrixXd load_molefraction_samples(const std::string& path, const StationSet& stations,
                                          const std::vector<osse::Slot>& slots);
void write_molefraction_samples(std::ostream& out, const Eigen::MatrixXd& draws, const std::vector<osse::Slot>& slots,
                                const StationSet& stations);
void write_molefraction_samples(const std::string& path, const Eigen::MatrixXd& draws,
                                const std::vector<osse::Slot>& slots, const StationSet& stations);

}  // namespace fluxinv::formats
