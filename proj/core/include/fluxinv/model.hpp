#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fluxinv/boxcox.hpp"
#include "fluxinv/covariance.hpp"

namespace fluxinv {

struct SpatialGrid {
  std::vector<std::string> cell_ids;
  Locations coords;
  Eigen::VectorXd weights;     // integration weights, > 0
  Eigen::MatrixXd covariates;  // n1 x p design X

  Eigen::Index size() const { return static_cast<Eigen::Index>(cell_ids.size()); }
  Eigen::Index n_covariates() const { return covariates.cols(); }
  std::optional<Eigen::Index> index_of(const std::string& cell_id) const;
  void validate() const;
};

struct StationSet {
  std::vector<std::string> ids;
  Locations coords;

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids.size()); }
  std::optional<Eigen::Index> index_of(const std::string& station_id) const;
  void validate() const;
};

// Per-time sensitivity matrices B_t (n_s x n1), already multiplied by the
// integration weights.
struct SensitivityStack {
  std::vector<Eigen::MatrixXd> per_time;

  Eigen::Index n_time() const { return static_cast<Eigen::Index>(per_time.size()); }
  Eigen::Index n_stations() const { return per_time.empty() ? 0 : per_time.front().rows(); }
  Eigen::Index n_cells() const { return per_time.empty() ? 0 : per_time.front().cols(); }
  // (T n_s) x n1, time-major rows.
  Eigen::MatrixXd stacked() const;
  void validate() const;
};

struct Reading {
  Eigen::Index t = 0;        // 0-based time index
  Eigen::Index station = 0;  // index into StationSet
  double value = 0.0;        // ppb
  double variance = 1.0;     // ppb^2
};

struct ObservationSet {
  std::vector<Reading> readings;

  std::size_t size() const { return readings.size(); }
  // Each reading must map to a distinct (t, station) slot inside the grid.
  void validate(Eigen::Index n_time, Eigen::Index n_stations) const;
};

// Open interval (lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double x) const { return x > lo && x < hi; }
  double width() const { return hi - lo; }
};

// Bounded-uniform priors on ln(1/tau2), a, ln d, theta11, theta12, lambda.
struct PriorBounds {
  Interval log_inv_tau2{-2.0, 20.0};
  Interval a{-1.0, 1.0};
  Interval log_d{-2.302585092994046, 1.6094379124341003};  // (ln 0.1, ln 5)
  Interval theta11{0.0, 2.0};
  Interval theta12{0.0, 2.0};
  Interval lambda{-3.0, 3.0};

  void validate() const;
  bool contains(const DiscrepancyParams& p) const;
  bool contains(const FluxCorrParams& p) const;
};

// Discrepancy parameters are sampled on (ln(1/tau2), a, ln d), where the
// priors are flat.
Eigen::Vector3d to_sampling_coords(const DiscrepancyParams& p);
DiscrepancyParams from_sampling_coords(const Eigen::Vector3d& c);

enum class FluxCorrelation { powered_exponential, identity };

class HierarchicalModel {
 public:
  HierarchicalModel(SpatialGrid grid, StationSet stations, SensitivityStack sensitivities,
                    ObservationSet observations, Eigen::VectorXd inventory, PriorBounds bounds = {},
                    FluxCorrelation flux_correlation = FluxCorrelation::powered_exponential);

  const SpatialGrid& grid() const { return grid_; }
  const StationSet& stations() const { return stations_; }
  const SensitivityStack& sensitivities() const { return sensitivities_; }
  const ObservationSet& observations() const { return observations_; }
  const Eigen::VectorXd& inventory() const { return inventory_; }
  const PriorBounds& bounds() const { return bounds_; }
  FluxCorrelation flux_correlation() const { return flux_correlation_; }

  Eigen::Index n_cells() const { return grid_.size(); }
  Eigen::Index n_stations() const { return stations_.size(); }
  Eigen::Index n_time() const { return sensitivities_.n_time(); }
  Eigen::Index n_slots() const { return n_time() * n_stations(); }
  Eigen::Index slot(Eigen::Index t, Eigen::Index station) const { return t * n_stations() + station; }

  const Eigen::MatrixXd& stacked_sensitivities() const { return b_stacked_; }
  // diag(C' V^-1 C): 1/variance at observed slots, 0 elsewhere.
  const Eigen::VectorXd& obs_precision() const { return obs_precision_; }
  // C' V^-1 Z2 on the full slot grid.
  const Eigen::VectorXd& obs_weighted_data() const { return obs_weighted_; }

  // Transformed-flux correlation R(theta1); identity for uncorrelated variants.
  Eigen::MatrixXd flux_correlation_matrix(const FluxCorrParams& theta1) const;
  covariance::SeparablePrecision discrepancy_precision(const DiscrepancyParams& p) const;

  // Same model with a different inventory or correlation structure.
  HierarchicalModel with_inventory(Eigen::VectorXd inventory) const;
  HierarchicalModel with_flux_correlation(FluxCorrelation c) const;

 private:
  SpatialGrid grid_;
  StationSet stations_;
  SensitivityStack sensitivities_;
  ObservationSet observations_;
  Eigen::VectorXd inventory_;
  PriorBounds bounds_;
  FluxCorrelation flux_correlation_;

  Eigen::MatrixXd b_stacked_;
  Eigen::VectorXd obs_precision_;
  Eigen::VectorXd obs_weighted_;
  Eigen::MatrixXd cell_distances_;
};

// Applies R^-1 (for the stacked two-block correlation) to the columns of its argument.
using InverseApply = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

// Generalised least squares estimate (X' R^-1 X)^-1 X' R^-1 G.
Eigen::VectorXd gls_beta(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, const InverseApply& r_inv);

// (G - X beta)' R^-1 (G - X beta).
double sum_sq_residuals(const Eigen::VectorXd& g, const Eigen::VectorXd& beta_hat,
                        const Eigen::MatrixXd& x, const InverseApply& r_inv);

// G' Psi G with Psi = R^-1 - R^-1 X (X' R^-1 X)^-1 X' R^-1; algebraically equal to
// sum_sq_residuals at the GLS estimate.
double psi_quadform(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, const InverseApply& r_inv);

// Box-Cox flux layer with beta and tau1 integrated out, for a fixed theta1.
// Y1 and W1 enter as two independent realisations sharing R(theta1).
class FluxFieldPrior {
 public:
  FluxFieldPrior(const HierarchicalModel& model, const FluxCorrParams& theta1);

  struct Residuals {
    double s2;
    Eigen::VectorXd psi_g1;  // Y1 block of Psi G
  };

  // S^2 for transformed vectors g1 = g(Y1), g2 = g(W1).
  Residuals residuals(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2, bool want_psi_g1) const;

  double log_det_r() const { return log_det_r_; }          // ln |R|
  double log_det_xrx() const { return log_det_xrx_; }      // ln |X' R_^-1 X| for the stacked design
  Eigen::Index n_cells() const { return n_; }

 private:
  Eigen::Index n_;
  bool identity_;
  Eigen::LLT<Eigen::MatrixXd> r_llt_;
  Eigen::MatrixXd x_;
  Eigen::MatrixXd r_inv_x_;
  Eigen::LLT<Eigen::MatrixXd> xrx_llt_;  // of 2 X' R^-1 X
  double log_det_r_ = 0.0;
  double log_det_xrx_ = 0.0;
};

// Y1-dependent part of ln p(Z2 | tau2, theta2, Y1): -1/2 Y1' H Y1 + Y1' h.
class FluxLikelihood {
 public:
  FluxLikelihood(const HierarchicalModel& model, const DiscrepancyParams& disc);

  double value(const Eigen::VectorXd& y1) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& y1) const;
  const Eigen::MatrixXd& curvature() const { return h_mat_; }
  const Eigen::VectorXd& linear() const { return h_vec_; }

 private:
  Eigen::MatrixXd h_mat_;  // B'(Q - Q A^-1 Q) B
  Eigen::VectorXd h_vec_;  // B' Q A^-1 C' V^-1 Z2
};

// Full conditional of Y1 given everything else, up to a Y1-free constant.
class FluxConditional {
 public:
  FluxConditional(const HierarchicalModel& model, const DiscrepancyParams& disc,
                  const FluxCorrParams& theta1, boxcox::BoxCoxParam lambda);
  FluxConditional(const HierarchicalModel& model, const FluxLikelihood& likelihood,
                  const FluxFieldPrior& prior, boxcox::BoxCoxParam lambda);

  // -inf outside the support. Gradient filled when requested and finite.
  double value(const Eigen::VectorXd& y1, Eigen::VectorXd* gradient = nullptr) const;

 private:
  const HierarchicalModel* model_;
  std::optional<FluxLikelihood> owned_likelihood_;
  std::optional<FluxFieldPrior> owned_prior_;
  const FluxLikelihood* likelihood_;
  const FluxFieldPrior* prior_;
  boxcox::BoxCoxParam lambda_;
  Eigen::VectorXd g2_;
  double log_jac_w1_ = 0.0;
};

// ln p(tau2, theta2 | Z2, Y1) on the sampling coordinates, up to a constant.
// -inf outside the prior bounds.
class DiscrepancyConditional {
 public:
  DiscrepancyConditional(const HierarchicalModel& model, const Eigen::VectorXd& y1);
  double operator()(const DiscrepancyParams& p) const;

 private:
  const HierarchicalModel* model_;
  Eigen::VectorXd by1_;
};

double log_cond_discrepancy(const DiscrepancyParams& params, const HierarchicalModel& model,
                            const Eigen::VectorXd& y1);

double log_cond_flux(const Eigen::VectorXd& y1, const HierarchicalModel& model,
                     const DiscrepancyParams& disc, const FluxCorrParams& theta1,
                     boxcox::BoxCoxParam lambda);

Eigen::VectorXd grad_log_cond_flux(const Eigen::VectorXd& y1, const HierarchicalModel& model,
                                   const DiscrepancyParams& disc, const FluxCorrParams& theta1,
                                   boxcox::BoxCoxParam lambda);

// ln p(theta1, lambda | Y1, W1) up to a constant; -inf outside the prior bounds.
// theta1 is ignored (and not bounds-checked) for identity flux correlation.
double log_cond_fluxparams(const FluxCorrParams& theta1, boxcox::BoxCoxParam lambda,
                           const Eigen::VectorXd& y1, const Eigen::VectorXd& w1,
                           const HierarchicalModel& model);

// Variant of log_cond_fluxparams that reuses a prior built for theta1.
double log_cond_fluxparams(const FluxFieldPrior& prior, boxcox::BoxCoxParam lambda,
                           const Eigen::VectorXd& y1, const Eigen::VectorXd& w1);

}  // namespace fluxinv
