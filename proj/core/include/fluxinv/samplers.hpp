#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fluxinv/boxcox.hpp"
#include "fluxinv/covariance.hpp"
#include "fluxinv/model.hpp"
#include "fluxinv/rng.hpp"

namespace fluxinv::samplers {

using LogDensity = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
// Returns the log-density and, when the pointer is non-null and the value is
// finite, writes the gradient.
using ValueAndGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct SliceConfig {
  int max_steps_out = 20;
  int max_shrinks = 200;
};

// One sweep of univariate stepping-out slice updates over every coordinate.
Eigen::VectorXd slice_sample_block(const LogDensity& log_density, const Eigen::VectorXd& current,
                                   const Eigen::VectorXd& widths, Rng& rng, const SliceConfig& cfg = {});

struct HmcConfig {
  double step_size = 0.1;
  int leapfrog_min = 10;
  int leapfrog_max = 25;
  int adapt_window = 1000;
  double accept_lo = 0.3;
  double accept_hi = 0.8;
  double target_accept = 0.65;
  // Diagonal of the inverse mass matrix; empty means identity.
  Eigen::VectorXd inv_mass;

  void validate() const;
};

struct HmcResult {
  bool accepted = false;
  Eigen::VectorXd state;
  double log_density = 0.0;
  double accept_prob = 0.0;
};

struct Trajectory {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  double log_density = 0.0;
  bool finite = true;  // false if the path left the support
};

// L leapfrog steps from (x0, p0).
Trajectory leapfrog(const ValueAndGradient& target, const Eigen::VectorXd& x0, const Eigen::VectorXd& p0,
                    double step_size, int n_steps, const Eigen::VectorXd& inv_mass = {});

HmcResult hmc_step(const ValueAndGradient& target, const Eigen::VectorXd& current, const HmcConfig& cfg, Rng& rng);
HmcResult hmc_step(const LogDensity& log_density, const Gradient& grad, const Eigen::VectorXd& current,
                   const HmcConfig& cfg, Rng& rng);

// Robbins-Monro update of ln(step) toward the target acceptance. `iteration`
// is 1-based; outside the adaptation window the step size is returned as is.
double adapt_step_size(const HmcConfig& cfg, double accept_rate, long iteration);

// Halves or doubles the step size until a single leapfrog step crosses an
// acceptance probability of one half.
double find_reasonable_step_size(const ValueAndGradient& target, const Eigen::VectorXd& x, double initial,
                                 Rng& rng, const Eigen::VectorXd& inv_mass = {});

struct ChainState {
  Eigen::VectorXd y1;
  DiscrepancyParams disc;
  FluxCorrParams theta1;
  boxcox::BoxCoxParam lambda;
  double step_size = 0.1;
  std::uint64_t stream = 0;
  long iteration = 0;
};

struct GibbsConfig {
  int n_chains = 2;
  long n_iter = 3000;
  long burn_in = 1500;
  long thin = 1;
  std::uint64_t seed = 1;
  HmcConfig hmc;
  // Set for variants that fix the Box-Cox parameter.
  std::optional<double> fixed_lambda;
  bool auto_initial_step = true;
  // Adapt a diagonal inverse mass from Y1 draws inside the adaptation window.
  bool adapt_mass = false;
  // 0: FLUXINV_THREADS, else hardware concurrency.
  int threads = 0;
  bool progress = false;

  void validate() const;
};

// Model variants 1..6: lambda free / fixed 0 / fixed 1, with spatial (1-3) or
// identity (4-6) flux correlation.
struct Variant {
  int id = 1;
  std::optional<double> fixed_lambda;
  FluxCorrelation correlation = FluxCorrelation::powered_exponential;
};
Variant variant(int id);

struct PosteriorSamples {
  Eigen::Index n_cells = 0;
  int n_chains = 0;
  std::vector<int> chain;
  std::vector<long> iteration;
  Eigen::MatrixXd flux;  // draws x cells
  std::vector<DiscrepancyParams> disc;
  std::vector<FluxCorrParams> theta1;
  std::vector<double> lambda;
  bool lambda_fixed = false;
  bool theta1_fixed = false;
  // Per chain, per iteration HMC acceptance indicators.
  std::vector<std::vector<std::uint8_t>> hmc_accepted;
  std::vector<double> final_step_size;

  std::size_t size() const { return chain.size(); }
  static long retained_per_chain(long n_iter, long burn_in, long thin);
  double acceptance_rate(int chain_index, long from_iteration = 0) const;
};

ChainState initialize_chain(const HierarchicalModel& model, Rng& rng,
                            std::optional<double> fixed_lambda = std::nullopt);

PosteriorSamples run_gibbs(const HierarchicalModel& model, const GibbsConfig& cfg);
PosteriorSamples run_gibbs(const HierarchicalModel& model, int n_chains, long n_iter, long burn_in, long thin,
                           std::uint64_t seed);

// Threads used for `n_chains` chains given a request (0 = environment default).
int resolve_threads(int requested, int n_chains);

}  // namespace fluxinv::samplers
