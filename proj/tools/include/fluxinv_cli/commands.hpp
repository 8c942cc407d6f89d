#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fluxinv_cli/config.hpp"

namespace fluxinv::cli {

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
// Hash over the contents of the given files, in order.
std::uint64_t hash_files(const std::vector<std::string>& paths);

struct SimulateResult {
  std::vector<std::string> written;
  std::size_t n_observations = 0;
  std::size_t n_heldout = 0;
};
SimulateResult cmd_simulate(const RunConfig& cfg);

struct InferResult {
  std::size_t retained = 0;
  std::vector<double> acceptance;
  double seconds = 0.0;
  std::string input_hash;
};
InferResult cmd_infer(const RunConfig& cfg);

struct DiagnoseOptions {
  std::string grid;
  std::string truth;        // inventory-schema file of true fluxes
  std::string samples_dir;  // holds flux_samples.csv (and molefraction_samples.csv)
  std::string masks;        // optional
  std::string stations;     // needed for mole-fraction scores
  std::string heldout;      // molefraction truth at held-out slots (optional)
  std::string model = "1";
  std::string out = "scores.csv";
  bool append = false;
};
struct DiagnoseResult {
  double flux_rmspe = 0.0;
  double flux_mcrps = 0.0;
  double mf_rmspe = 0.0;  // NaN when not scored
  double mf_mcrps = 0.0;
};
DiagnoseResult cmd_diagnose(const DiagnoseOptions& opt);

// Writes the directional-kernel example as CSV slices; returns the files.
std::vector<std::string> cmd_cumulants_demo(long grid_n, const std::string& out_dir);

}  // namespace fluxinv::cli
