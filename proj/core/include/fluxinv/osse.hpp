#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fluxinv/boxcox.hpp"
#include "fluxinv/covariance.hpp"
#include "fluxinv/model.hpp"
#include "fluxinv/rng.hpp"
#include "fluxinv/samplers.hpp"

namespace fluxinv::osse {

// g s^-1 -> Tg yr^-1.
inline constexpr double kGramsPerSecondToTgPerYear = 3600.0 * 24.0 * 365.25 / 1e12;

struct RegularGridSpec {
  int nx = 10;
  int ny = 6;
  double lon0 = 0.0;  // centre of the first cell
  double lat0 = 50.0;
  double dlon = 0.7;
  double dlat = 0.5;
  // Two-column indicator design split at this latitude; unset -> intercept only.
  std::optional<double> split_lat;
};

// Row-major regular grid with unit weights and ids "c<k>" (k from 1).
SpatialGrid regular_grid(const RegularGridSpec& spec);

struct PlumeParams {
  double mean_direction = 4.0;  // radians; direction the air arrives from
  double wind_ar = 0.9;         // AR(1) coefficient of the direction anomaly
  double wind_sd = 1.2;         // marginal s.d. of the anomaly, radians
  double along_offset = 2.0;    // plume centre distance upwind, degrees
  double along_sd = 2.5;        // degrees
  double cross_sd = 0.8;        // degrees
  double local_sd = 0.6;        // near-station footprint, degrees
  double local_weight = 0.5;
  // Rows are normalised so mean row sum * reference_flux = target_signal ppb,
  // then multiplied by amplitude. reference_flux <= 0 skips normalisation.
  double reference_flux = 0.0;
  double target_signal = 50.0;
  double amplitude = 1.0;
};

SensitivityStack synth_sensitivities(const SpatialGrid& grid, const StationSet& stations, Eigen::Index T, Rng& rng,
                                     const PlumeParams& plume = {});

struct Missingness {
  double fraction = 0.1;  // each slot independently missing with this probability
  std::vector<std::pair<Eigen::Index, Eigen::Index>> slots;  // explicit (t, station) list; overrides fraction
  bool explicit_slots = false;
};

struct SimulatedData {
  ObservationSet observations;
  Eigen::MatrixXd y2;                                         // T x n_s true mole fractions
  std::vector<std::pair<Eigen::Index, Eigen::Index>> missing;  // held-out (t, station) slots
};

// Y2 = B_t Y1 + zeta_t, Z2 = C Y2 + eps. Missingness is drawn after the noise.
SimulatedData simulate(const Eigen::VectorXd& y1_true, const SensitivityStack& stack, const StationSet& stations,
                       const DiscrepancyParams& disc, double obs_variance, const Missingness& missing, Rng& rng);

ObservationSet simulate_observations(const Eigen::VectorXd& y1_true, const SensitivityStack& stack,
                                     const StationSet& stations, const DiscrepancyParams& disc, double obs_variance,
                                     const Missingness& missing, Rng& rng);

// Affine map a W + b matching a target sample mean and variance.
Eigen::VectorXd scale_inventory(const Eigen::VectorXd& w, double target_mean, double target_variance);

struct Slot {
  Eigen::Index t = 0;
  Eigen::Index station = 0;
};

struct MolefractionConditional {
  Eigen::VectorXd mean;        // full slot grid
  Eigen::MatrixXd covariance;  // dense; filled only on request
};

// Gaussian conditional of Y2 given (Z2, Y1, tau2, theta2).
MolefractionConditional molefraction_conditional(const HierarchicalModel& model, const Eigen::VectorXd& y1,
                                                 const DiscrepancyParams& disc, bool dense_covariance = false);

// One Y2 draw per posterior sample (or per every `stride`-th sample), at the
// requested slots. Result is draws x slots.
Eigen::MatrixXd posterior_molefraction(const samplers::PosteriorSamples& samples, const HierarchicalModel& model,
                                       const std::vector<Slot>& slots, Rng& rng, std::size_t stride = 1);

double score_rmspe(const Eigen::VectorXd& truth, const Eigen::MatrixXd& predictions);
double score_mcrps(const Eigen::VectorXd& truth, const Eigen::MatrixXd& predictions);

// Empirical CRPS of one sample against a scalar outcome.
double crps_sample(std::vector<double> draws, double outcome);

struct RegionMask {
  std::string name;
  std::vector<std::string> cell_ids;
};

enum class FluxUnit { grams_per_second, teragrams_per_year };

struct AggregateSummary {
  Eigen::VectorXd totals;  // per draw
  double median = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};

std::vector<Eigen::Index> resolve_mask(const RegionMask& mask, const SpatialGrid& grid);

AggregateSummary aggregate_flux(const Eigen::MatrixXd& flux_draws, const RegionMask& mask, const SpatialGrid& grid,
                                FluxUnit unit = FluxUnit::grams_per_second);
AggregateSummary aggregate_flux(const samplers::PosteriorSamples& samples, const RegionMask& mask,
                                const SpatialGrid& grid, FluxUnit unit = FluxUnit::grams_per_second);

// Linear-interpolation sample quantile (type 7).
double quantile(std::vector<double> values, double p);

struct BoxCoxFieldSpec {
  FluxCorrParams theta1;
  double tau1 = 1.0;
  Eigen::VectorXd beta;
  double lambda = 0.0;
  FluxCorrelation correlation = FluxCorrelation::powered_exponential;
};

// Draws g ~ N(X beta, R/tau1), redrawing on truncation violation, and returns g_lambda^-1(g).
class BoxCoxFieldSimulator {
 public:
  BoxCoxFieldSimulator(const SpatialGrid& grid, const BoxCoxFieldSpec& spec);
  Eigen::VectorXd draw(Rng& rng) const;
  Eigen::VectorXd draw_transformed(Rng& rng) const;

  static constexpr int kMaxAttempts = 1000;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd chol_;
  double sd_;
  boxcox::BoxCoxParam lambda_;
};

Eigen::VectorXd simulate_boxcox_field(const SpatialGrid& grid, const BoxCoxFieldSpec& spec, Rng& rng);

struct OsseConfig {
  std::variant<std::string, BoxCoxFieldSpec> truth;  // inventory path or simulation spec
  DiscrepancyParams disc{0.01, 0.9, 2.5};
  double obs_variance = 1.0;
  Missingness missing;
  int variant = 1;

  void validate() const;
};

struct Scores {
  double flux_rmspe = 0.0;
  double flux_mcrps = 0.0;
  double mf_rmspe = 0.0;
  double mf_mcrps = 0.0;
};

// Flux scores against the true field and mole-fraction scores at held-out slots.
Scores score_posterior(const samplers::PosteriorSamples& samples, const HierarchicalModel& model,
                       const Eigen::VectorXd& flux_truth, const std::vector<Slot>& mf_slots,
                       const Eigen::VectorXd& mf_truth, Rng& rng, std::size_t mf_stride = 1);

}  // namespace fluxinv::osse
