#pragma once

// Brute-force dense computations used as independent references. Nothing here
// reuses the factored or block-structured code paths of the library.

#include <Eigen/Dense>

#include "fluxinv/model.hpp"

namespace fluxinv::fixtures::dense {

Eigen::MatrixXd ar1_cov(double a, Eigen::Index T);
Eigen::MatrixXd station_corr(double d, const Locations& locs);
Eigen::MatrixXd powered_exp(const FluxCorrParams& theta, const Locations& locs);
// (1/tau2) kron(Sigma_t, R_s), time-major.
Eigen::MatrixXd discrepancy_cov(const DiscrepancyParams& p, Eigen::Index T, const Locations& locs);

double boxcox(double y, double lambda);

struct ObsSystem {
  Eigen::MatrixXd c;  // readings x slots
  Eigen::VectorXd z;
  Eigen::MatrixXd v;
};
ObsSystem observation_system(const HierarchicalModel& model);

double log_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

// ln N(Z2; C B Y1, C Sigma C' + V).
double log_marginal_z(const HierarchicalModel& model, const DiscrepancyParams& p, const Eigen::VectorXd& y1);

// ln p(Y1, W1 | theta1, lambda) with beta and tau1 integrated in closed form,
// built from the dense stacked correlation.
double log_flux_field(const HierarchicalModel& model, const FluxCorrParams& theta, double lambda,
                      const Eigen::VectorXd& y1);

// Same quantity by explicit Gaussian integration over beta and numeric
// quadrature over tau1 (prior tau1^(p/2 - 1)).
double log_flux_field_quadrature(const HierarchicalModel& model, const FluxCorrParams& theta, double lambda,
                                 const Eigen::VectorXd& y1);

struct Conditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
// Covariance-form Gaussian conditional of Y2 given Z2.
Conditional molefraction(const HierarchicalModel& model, const DiscrepancyParams& p, const Eigen::VectorXd& y1);

}  // namespace fluxinv::fixtures::dense
