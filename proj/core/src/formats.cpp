#include "fluxinv/formats.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "fluxinv/csv.hpp"
#include "fluxinv/errors.hpp"

namespace fluxinv::formats {

namespace {

using csv::format_double;
using csv::parse_double;
using csv::parse_int;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return in;
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path, 0, "cannot open file for writing");
  fn(out);
  out.flush();
  if (!out) throw FormatError(path, 0, "write failed");
}

std::unordered_map<std::string, Eigen::Index> index_ids(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, Eigen::Index> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], static_cast<Eigen::Index>(i));
  return m;
}

Eigen::Index lookup(const std::unordered_map<std::string, Eigen::Index>& m, const std::string& id, const char* kind,
                    const csv::Row& row, const std::string& source) {
  const auto it = m.find(id);
  if (it == m.end()) throw FormatError(source, row.line, std::string("unknown ") + kind + " '" + id + "'");
  return it->second;
}

void require_id(const std::string& id, const char* column, const csv::Row& row, const std::string& source) {
  if (id.empty()) throw FormatError(source, row.line, std::string("column '") + column + "' must not be empty");
}

// 1-based time index within 1..T (T <= 0: any positive value), returned 0-based.
Eigen::Index parse_time(const std::string& field, Eigen::Index T, const csv::Row& row, const std::string& source) {
  const long long t = parse_int(field, source, row.line, "t");
  if (t < 1 || (T > 0 && t > T)) {
    throw FormatError(source, row.line,
                      "t = " + field + " is out of range" + (T > 0 ? " 1.." + std::to_string(T) : std::string(" (t >= 1)")));
  }
  return static_cast<Eigen::Index>(t - 1);
}

long long parse_draw(const std::string& field, const csv::Row& row, const std::string& source) {
  const long long d = parse_int(field, source, row.line, "draw");
  if (d < 1) throw FormatError(source, row.line, "draw index must be >= 1");
  return d;
}

void check_draws_complete(std::size_t n_draws, std::size_t n_rows, std::size_t per_draw, const std::string& source) {
  if (n_rows != n_draws * per_draw) {
    throw FormatError(source, 0, "incomplete draws: expected " + std::to_string(per_draw) + " rows per draw");
  }
}

}  // namespace

// ---- grid -------------------------------------------------------------------

SpatialGrid read_grid(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  if (t.schema_id && *t.schema_id != kGridSchema) {
    throw FormatError(source, 1, "schema '" + *t.schema_id + "' is not '" + kGridSchema + "'");
  }
  const std::vector<std::string> fixed{"cell_id", "lon", "lat", "weight"};
  if (t.header.size() < 5 || !std::equal(fixed.begin(), fixed.end(), t.header.begin())) {
    throw FormatError(source, t.header_line, "header must be 'cell_id,lon,lat,weight,x1[,x2,...]'");
  }
  const std::size_t p = t.header.size() - 4;
  for (std::size_t k = 0; k < p; ++k) {
    if (t.header[4 + k] != "x" + std::to_string(k + 1)) {
      throw FormatError(source, t.header_line, "covariate column " + std::to_string(k + 1) + " must be named 'x" +
                                                   std::to_string(k + 1) + "'");
    }
  }
  if (t.rows.empty()) throw FormatError(source, t.header_line, "grid has no cells");

  SpatialGrid g;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  g.weights.resize(n);
  g.covariates.resize(n, static_cast<Eigen::Index>(p));
  std::set<std::string> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const auto& f = row.fields;
    require_id(f[0], "cell_id", row, source);
    if (!seen.insert(f[0]).second) throw FormatError(source, row.line, "duplicate cell_id '" + f[0] + "'");
    g.cell_ids.push_back(f[0]);
    g.coords.push_back({parse_double(f[1], source, row.line, "lon"), parse_double(f[2], source, row.line, "lat")});
    g.weights[i] = parse_double(f[3], source, row.line, "weight");
    if (!(g.weights[i] > 0.0)) throw FormatError(source, row.line, "weight must be positive");
    for (std::size_t k = 0; k < p; ++k) {
      g.covariates(i, static_cast<Eigen::Index>(k)) = parse_double(f[4 + k], source, row.line, t.header[4 + k]);
    }
  }
  try {
    g.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(source, 0, e.what());
  }
  return g;
}

SpatialGrid load_grid(const std::string& path) {
  auto in = open_in(path);
  return read_grid(in, path);
}

void write_grid(std::ostream& out, const SpatialGrid& grid) {
  csv::Writer w(out);
  w.schema(kGridSchema);
  std::vector<std::string> header{"cell_id", "lon", "lat", "weight"};
  for (Eigen::Index k = 0; k < grid.n_covariates(); ++k) header.push_back("x" + std::to_string(k + 1));
  w.row(header);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto& c = grid.coords[static_cast<std::size_t>(i)];
    std::vector<std::string> f{grid.cell_ids[static_cast<std::size_t>(i)], format_double(c.lon), format_double(c.lat),
                               format_double(grid.weights[i])};
    for (Eigen::Index k = 0; k < grid.n_covariates(); ++k) f.push_back(format_double(grid.covariates(i, k)));
    w.row(f);
  }
}

void write_grid(const std::string& path, const SpatialGrid& grid) {
  write_file(path, [&](std::ostream& o) { write_grid(o, grid); });
}

// ---- stations ---------------------------------------------------------------

StationSet read_stations(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read_schema(in, source, kStationsSchema, {"station_id", "lon", "lat"});
  if (t.rows.empty()) throw FormatError(source, t.header_line, "no stations");
  StationSet s;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    require_id(f[0], "station_id", row, source);
    if (!seen.insert(f[0]).second) throw FormatError(source, row.line, "duplicate station_id '" + f[0] + "'");
    s.ids.push_back(f[0]);
    s.coords.push_back({parse_double(f[1], source, row.line, "lon"), parse_double(f[2], source, row.line, "lat")});
  }
  return s;
}

StationSet load_stations(const std::string& path) {
  auto in = open_in(path);
  return read_stations(in, path);
}

void write_stations(std::ostream& out, const StationSet& stations) {
  csv::Writer w(out);
  w.schema(kStationsSchema);
  w.row({"station_id", "lon", "lat"});
  for (std::size_t i = 0; i < stations.ids.size(); ++i) {
    w.row({stations.ids[i], format_double(stations.coords[i].lon), format_double(stations.coords[i].lat)});
  }
}

void write_stations(const std::string& path, const StationSet& stations) {
  write_file(path, [&](std::ostream& o) { write_stations(o, stations); });
}

// ---- sensitivities ----------------------------------------------------------

SensitivityStack read_sensitivities(std::istream& in, const std::string& source, const SpatialGrid& grid,
                                    const StationSet& stations, Eigen::Index T) {
  if (T < 1) throw FormatError(source, 0, "sensitivities need T >= 1");
  // A zero-byte file is a legal (if useless) all-zero stack.
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  SensitivityStack stack;
  stack.per_time.assign(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(stations.size(), grid.size()));
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    std::cerr << "warning: " << source << ": empty sensitivity file, all sensitivities are zero\n";
    return stack;
  }
  buf.clear();
  buf.seekg(0);
  const csv::Table t = csv::read_schema(buf, source, kSensitivitiesSchema, {"t", "station_id", "cell_id", "value"});
  if (const auto conv = t.directive("convention"); conv && *conv != "weighted") {
    throw FormatError(source, 0, "unsupported sensitivity convention '" + *conv + "'; expected 'weighted'");
  }
  if (t.rows.empty()) std::cerr << "warning: " << source << ": no sensitivity rows, all sensitivities are zero\n";
  const auto cells = index_ids(grid.cell_ids);
  const auto sts = index_ids(stations.ids);
  std::set<std::tuple<Eigen::Index, Eigen::Index, Eigen::Index>> seen;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    const Eigen::Index ti = parse_time(f[0], T, row, source);
    const Eigen::Index si = lookup(sts, f[1], "station_id", row, source);
    const Eigen::Index ci = lookup(cells, f[2], "cell_id", row, source);
    if (!seen.emplace(ti, si, ci).second) throw FormatError(source, row.line, "duplicate (t, station_id, cell_id)");
    stack.per_time[static_cast<std::size_t>(ti)](si, ci) = parse_double(f[3], source, row.line, "value");
  }
  return stack;
}

SensitivityStack load_sensitivities(const std::string& path, const SpatialGrid& grid, const StationSet& stations,
                                    Eigen::Index T) {
  auto in = open_in(path);
  return read_sensitivities(in, path, grid, stations, T);
}

void write_sensitivities(std::ostream& out, const SensitivityStack& stack, const SpatialGrid& grid,
                         const StationSet& stations) {
  csv::Writer w(out);
  w.schema(kSensitivitiesSchema);
  w.directive("convention: weighted");
  w.row({"t", "station_id", "cell_id", "value"});
  for (Eigen::Index t = 0; t < stack.n_time(); ++t) {
    const auto& b = stack.per_time[static_cast<std::size_t>(t)];
    for (Eigen::Index s = 0; s < b.rows(); ++s) {
      for (Eigen::Index c = 0; c < b.cols(); ++c) {
        if (b(s, c) == 0.0) continue;
        w.row({std::to_string(t + 1), stations.ids[static_cast<std::size_t>(s)],
               grid.cell_ids[static_cast<std::size_t>(c)], format_double(b(s, c))});
      }
    }
  }
}

void write_sensitivities(const std::string& path, const SensitivityStack& stack, const SpatialGrid& grid,
                         const StationSet& stations) {
  write_file(path, [&](std::ostream& o) { write_sensitivities(o, stack, grid, stations); });
}

// ---- observations -----------------------------------------------------------

ObservationSet read_observations(std::istream& in, const std::string& source, const StationSet& stations,
                                 Eigen::Index T) {
  const csv::Table t = csv::read_schema(in, source, kObservationsSchema, {"t", "station_id", "value", "variance"});
  const auto sts = index_ids(stations.ids);
  ObservationSet obs;
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    Reading r;
    r.t = parse_time(f[0], T, row, source);
    r.station = lookup(sts, f[1], "station_id", row, source);
    r.value = parse_double(f[2], source, row.line, "value");
    r.variance = parse_double(f[3], source, row.line, "variance");
    if (!(r.variance > 0.0)) throw FormatError(source, row.line, "variance must be positive");
    if (!seen.emplace(r.t, r.station).second) throw FormatError(source, row.line, "duplicate (t, station_id)");
    obs.readings.push_back(r);
  }
  return obs;
}

ObservationSet load_observations(const std::string& path, const StationSet& stations, Eigen::Index T) {
  auto in = open_in(path);
  return read_observations(in, path, stations, T);
}

void write_observations(std::ostream& out, const ObservationSet& obs, const StationSet& stations) {
  csv::Writer w(out);
  w.schema(kObservationsSchema);
  w.row({"t", "station_id", "value", "variance"});
  for (const auto& r : obs.readings) {
    w.row({std::to_string(r.t + 1), stations.ids.at(static_cast<std::size_t>(r.station)), format_double(r.value),
           format_double(r.variance)});
  }
}

void write_observations(const std::string& path, const ObservationSet& obs, const StationSet& stations) {
  write_file(path, [&](std::ostream& o) { write_observations(o, obs, stations); });
}

// ---- inventory --------------------------------------------------------------

Eigen::VectorXd read_inventory(std::istream& in, const std::string& source, const SpatialGrid& grid) {
  const csv::Table t = csv::read_schema(in, source, kInventorySchema, {"cell_id", "flux"});
  const auto cells = index_ids(grid.cell_ids);
  Eigen::VectorXd flux(grid.size());
  std::vector<bool> seen(static_cast<std::size_t>(grid.size()), false);
  for (const auto& row : t.rows) {
    const Eigen::Index ci = lookup(cells, row.fields[0], "cell_id", row, source);
    if (seen[static_cast<std::size_t>(ci)]) throw FormatError(source, row.line, "duplicate cell_id '" + row.fields[0] + "'");
    seen[static_cast<std::size_t>(ci)] = true;
    flux[ci] = parse_double(row.fields[1], source, row.line, "flux");
    if (!(flux[ci] > 0.0)) throw FormatError(source, row.line, "flux must be positive");
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw FormatError(source, 0, "no flux for cell '" + grid.cell_ids[i] + "'");
  }
  return flux;
}

Eigen::VectorXd load_inventory(const std::string& path, const SpatialGrid& grid) {
  auto in = open_in(path);
  return read_inventory(in, path, grid);
}

void write_inventory(std::ostream& out, const Eigen::VectorXd& flux, const SpatialGrid& grid) {
  if (flux.size() != grid.size()) throw ParameterError("flux length does not match the grid");
  csv::Writer w(out);
  w.schema(kInventorySchema);
  w.row({"cell_id", "flux"});
  for (Eigen::Index i = 0; i < flux.size(); ++i) {
    w.row({grid.cell_ids[static_cast<std::size_t>(i)], format_double(flux[i])});
  }
}

void write_inventory(const std::string& path, const Eigen::VectorXd& flux, const SpatialGrid& grid) {
  write_file(path, [&](std::ostream& o) { write_inventory(o, flux, grid); });
}

// ---- masks ------------------------------------------------------------------

std::vector<osse::RegionMask> read_masks(std::istream& in, const std::string& source, const SpatialGrid& grid) {
  const csv::Table t = csv::read_schema(in, source, kMasksSchema, {"mask_name", "cell_id"});
  const auto cells = index_ids(grid.cell_ids);
  std::vector<osse::RegionMask> masks;
  std::map<std::string, std::size_t> by_name;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    require_id(f[0], "mask_name", row, source);
    lookup(cells, f[1], "cell_id", row, source);
    if (!seen.emplace(f[0], f[1]).second) throw FormatError(source, row.line, "duplicate (mask_name, cell_id)");
    auto [it, inserted] = by_name.emplace(f[0], masks.size());
    if (inserted) masks.push_back({f[0], {}});
    masks[it->second].cell_ids.push_back(f[1]);
  }
  return masks;
}

std::vector<osse::RegionMask> load_masks(const std::string& path, const SpatialGrid& grid) {
  auto in = open_in(path);
  return read_masks(in, path, grid);
}

void write_masks(std::ostream& out, const std::vector<osse::RegionMask>& masks) {
  csv::Writer w(out);
  w.schema(kMasksSchema);
  w.row({"mask_name", "cell_id"});
  for (const auto& m : masks) {
    for (const auto& c : m.cell_ids) w.row({m.name, c});
  }
}

void write_masks(const std::string& path, const std::vector<osse::RegionMask>& masks) {
  write_file(path, [&](std::ostream& o) { write_masks(o, masks); });
}

// ---- samples ----------------------------------------------------------------

Eigen::MatrixXd read_flux_samples(std::istream& in, const std::string& source, const SpatialGrid& grid) {
  const csv::Table t = csv::read_schema(in, source, kFluxSamplesSchema, {"draw", "cell_id", "value"});
  const auto cells = index_ids(grid.cell_ids);
  std::map<long long, Eigen::VectorXd> draws;
  std::set<std::pair<long long, Eigen::Index>> seen;
  for (const auto& row : t.rows) {
    const long long d = parse_draw(row.fields[0], row, source);
    const Eigen::Index ci = lookup(cells, row.fields[1], "cell_id", row, source);
    if (!seen.emplace(d, ci).second) throw FormatError(source, row.line, "duplicate (draw, cell_id)");
    auto [it, inserted] = draws.try_emplace(d);
    if (inserted) it->second = Eigen::VectorXd::Zero(grid.size());
    it->second[ci] = parse_double(row.fields[2], source, row.line, "value");
  }
  if (draws.empty()) throw FormatError(source, 0, "no draws");
  if (static_cast<long long>(draws.size()) != draws.rbegin()->first) {
    throw FormatError(source, 0, "draw indices must run 1..N without gaps");
  }
  check_draws_complete(draws.size(), t.rows.size(), static_cast<std::size_t>(grid.size()), source);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), grid.size());
  for (const auto& [d, v] : draws) out.row(static_cast<Eigen::Index>(d - 1)) = v.transpose();
  return out;
}

Eigen::MatrixXd load_flux_samples(const std::string& path, const SpatialGrid& grid) {
  auto in = open_in(path);
  return read_flux_samples(in, path, grid);
}

void write_flux_samples(std::ostream& out, const Eigen::MatrixXd& flux, const SpatialGrid& grid) {
  if (flux.cols() != grid.size()) throw ParameterError("flux samples do not match the grid");
  csv::Writer w(out);
  w.schema(kFluxSamplesSchema);
  w.row({"draw", "cell_id", "value"});
  for (Eigen::Index d = 0; d < flux.rows(); ++d) {
    const std::string draw = std::to_string(d + 1);
    for (Eigen::Index c = 0; c < flux.cols(); ++c) {
      w.row({draw, grid.cell_ids[static_cast<std::size_t>(c)], format_double(flux(d, c))});
    }
  }
}

std::map<std::string, std::vector<double>> read_param_samples(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read_schema(in, source, kParamSamplesSchema, {"draw", "name", "value"});
  std::map<std::string, std::map<long long, double>> by_name;
  for (const auto& row : t.rows) {
    const long long d = parse_draw(row.fields[0], row, source);
    require_id(row.fields[1], "name", row, source);
    const double v = parse_double(row.fields[2], source, row.line, "value");
    if (!by_name[row.fields[1]].emplace(d, v).second) throw FormatError(source, row.line, "duplicate (draw, name)");
  }
  std::map<std::string, std::vector<double>> out;
  for (auto& [name, draws] : by_name) {
    if (static_cast<long long>(draws.size()) != draws.rbegin()->first) {
      throw FormatError(source, 0, "draw indices for '" + name + "' must run 1..N without gaps");
    }
    auto& v = out[name];
    for (const auto& [d, x] : draws) v.push_back(x);
  }
  return out;
}

std::map<std::string, std::vector<double>> load_param_samples(const std::string& path) {
  auto in = open_in(path);
  return read_param_samples(in, path);
}

void write_param_samples(std::ostream& out, const samplers::PosteriorSamples& samples) {
  csv::Writer w(out);
  w.schema(kParamSamplesSchema);
  w.row({"draw", "name", "value"});
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const std::string draw = std::to_string(k + 1);
    w.row({draw, "tau2", format_double(samples.disc[k].tau2)});
    w.row({draw, "a", format_double(samples.disc[k].a)});
    w.row({draw, "d", format_double(samples.disc[k].d)});
    if (!samples.theta1_fixed) {
      w.row({draw, "theta11", format_double(samples.theta1[k].theta11)});
      w.row({draw, "theta12", format_double(samples.theta1[k].theta12)});
    }
    if (!samples.lambda_fixed) w.row({draw, "lambda", format_double(samples.lambda[k])});
  }
}

void write_samples(const samplers::PosteriorSamples& samples, const SpatialGrid& grid, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError(dir, 0, "cannot create directory: " + ec.message());
  const auto base = std::filesystem::path(dir);
  write_file((base / "flux_samples.csv").string(), [&](std::ostream& o) { write_flux_samples(o, samples.flux, grid); });
  write_file((base / "param_samples.csv").string(), [&](std::ostream& o) { write_param_samples(o, samples); });
}

// ---- mole fractions ---------------------------------------------------------

MolefractionTable read_molefraction(std::istream& in, const std::string& source, const StationSet& stations) {
  const csv::Table t = csv::read_schema(in, source, kMolefractionSchema, {"t", "station_id", "value"});
  const auto sts = index_ids(stations.ids);
  MolefractionTable out;
  out.values.resize(static_cast<Eigen::Index>(t.rows.size()));
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  Eigen::Index k = 0;
  for (const auto& row : t.rows) {
    osse::Slot s{parse_time(row.fields[0], 0, row, source), lookup(sts, row.fields[1], "station_id", row, source)};
    if (!seen.emplace(s.t, s.station).second) throw FormatError(source, row.line, "duplicate (t, station_id)");
    out.slots.push_back(s);
    out.values[k++] = parse_double(row.fields[2], source, row.line, "value");
  }
  return out;
}

MolefractionTable load_molefraction(const std::string& path, const StationSet& stations) {
  auto in = open_in(path);
  return read_molefraction(in, path, stations);
}

void write_molefraction(std::ostream& out, const MolefractionTable& table, const StationSet& stations) {
  csv::Writer w(out);
  w.schema(kMolefractionSchema);
  w.row({"t", "station_id", "value"});
  for (std::size_t i = 0; i < table.slots.size(); ++i) {
    w.row({std::to_string(table.slots[i].t + 1), stations.ids.at(static_cast<std::size_t>(table.slots[i].station)),
           format_double(table.values[static_cast<Eigen::Index>(i)])});
  }
}

void write_molefraction(const std::string& path, const MolefractionTable& table, const StationSet& stations) {
  write_file(path, [&](std::ostream& o) { write_molefraction(o, table, stations); });
}

Eigen::MatrixXd read_molefraction_samples(std::istream& in, const std::string& source, const StationSet& stations,
                                          const std::vector<osse::Slot>& slots) {
  const csv::Table t =
      csv::read_schema(in, source, kMolefractionSamplesSchema, {"draw", "t", "station_id", "value"});
  const auto sts = index_ids(stations.ids);
  std::map<std::pair<Eigen::Index, Eigen::Index>, Eigen::Index> slot_index;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    slot_index.emplace(std::make_pair(slots[j].t, slots[j].station), static_cast<Eigen::Index>(j));
  }
  std::map<long long, Eigen::VectorXd> draws;
  std::set<std::pair<long long, Eigen::Index>> seen;
  for (const auto& row : t.rows) {
    const long long d = parse_draw(row.fields[0], row, source);
    const Eigen::Index ti = parse_time(row.fields[1], 0, row, source);
    const Eigen::Index si = lookup(sts, row.fields[2], "station_id", row, source);
    const auto it = slot_index.find({ti, si});
    if (it == slot_index.end()) throw FormatError(source, row.line, "slot is not among the requested slots");
    if (!seen.emplace(d, it->second).second) throw FormatError(source, row.line, "duplicate (draw, t, station_id)");
    auto [dit, inserted] = draws.try_emplace(d);
    if (inserted) dit->second = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(slots.size()));
    dit->second[it->second] = parse_double(row.fields[3], source, row.line, "value");
  }
  if (draws.empty()) throw FormatError(source, 0, "no draws");
  if (static_cast<long long>(draws.size()) != draws.rbegin()->first) {
    throw FormatError(source, 0, "draw indices must run 1..N without gaps");
  }
  check_draws_complete(draws.size(), t.rows.size(), slots.size(), source);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), static_cast<Eigen::Index>(slots.size()));
  for (const auto& [d, v] : draws) out.row(static_cast<Eigen::Index>(d - 1)) = v.transpose();
  return out;
}

Eigen::MatrixXd load_molefraction_samples(const std::string& path, const StationSet& stations,
                                          const std::vector<osse::Slot>& slots) {
  auto in = open_in(path);
  return read_molefraction_samples(in, path, stations, slots);
}

void write_molefraction_samples(std::ostream& out, const Eigen::MatrixXd& draws, const std::vector<osse::Slot>& slots,
                                const StationSet& stations) {
  csv::Writer w(out);
  w.schema(kMolefractionSamplesSchema);
  w.row({"draw", "t", "station_id", "value"});
  for (Eigen::Index d = 0; d < draws.rows(); ++d) {
    const std::string draw = std::to_string(d + 1);
    for (std::size_t j = 0; j < slots.size(); ++j) {
      w.row({draw, std::to_string(slots[j].t + 1), stations.ids.at(static_cast<std::size_t>(slots[j].station)),
             format_double(draws(d, static_cast<Eigen::Index>(j)))});
    }
  }
}

void write_molefraction_samples(const std::string& path, const Eigen::MatrixXd& draws,
                                const std::vector<osse::Slot>& slots, const StationSet& stations) {
  write_file(path, [&](std::ostream& o) { write_molefraction_samples(o, draws, slots, stations); });
}

}  // namespace fluxinv::formats
