#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <vector>

#include "fluxinv/rng.hpp"

namespace fluxinv {

struct Coord {
  double lon = 0.0;  // degrees
  double lat = 0.0;  // degrees
};

using Locations = std::vector<Coord>;

// Planar Euclidean distance in degrees.
double distance(const Coord& a, const Coord& b);
Eigen::MatrixXd distance_matrix(const Locations& locations);

struct FluxCorrParams {
  double theta11 = 1.0;  // inverse length scale
  double theta12 = 1.0;  // smoothness exponent, in (0, 2)
};

struct DiscrepancyParams {
  double tau2 = 1.0;  // marginal precision, ppb^-2
  double a = 0.0;     // AR(1) coefficient
  double d = 1.0;     // e-folding length, degrees
};

// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
struct SymTridiag {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;  // size n-1

  Eigen::Index size() const { return diag.size(); }
  Eigen::MatrixXd to_dense() const;
  double log_det() const;
};

}  // namespace fluxinv

namespace fluxinv::covariance {

// exp(-theta11 |u1 - u2|^theta12).
Eigen::MatrixXd powered_exp_corr(FluxCorrParams params, const Locations& locations);
// Same, reusing a precomputed distance matrix.
Eigen::MatrixXd powered_exp_corr(FluxCorrParams params, const Eigen::MatrixXd& distances);

// exp(-u / d).
Eigen::MatrixXd exponential_corr(double d, const Locations& locations);

// Precision of a unit-marginal-variance AR(1) over T steps.
SymTridiag ar1_precision(double a, Eigen::Index T);

// Cholesky of an SPD matrix; on failure retries once with a 1e-10 diagonal
// jitter, then throws ConditioningError naming `what`.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& m, const char* what);

// Q_zeta = tau2 * (Q_t kron R_s^-1), held in factored form. Vectors on the
// space-time grid are time-major: index t * n_s + s.
class SeparablePrecision {
 public:
  SeparablePrecision(DiscrepancyParams params, SymTridiag q_time, Eigen::MatrixXd r_space);

  Eigen::Index n_time() const { return q_time_.size(); }
  Eigen::Index n_space() const { return r_space_.rows(); }
  Eigen::Index size() const { return n_time() * n_space(); }

  const DiscrepancyParams& params() const { return params_; }
  double tau2() const { return params_.tau2; }
  const SymTridiag& q_time() const { return q_time_; }
  const Eigen::MatrixXd& r_space() const { return r_space_; }
  const Eigen::MatrixXd& r_space_inv() const { return r_space_inv_; }
  const Eigen::MatrixXd& r_space_chol() const { return r_space_chol_; }

  double log_det() const;
  double quadform(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

  // Dense Q_zeta; for tests and small problems only.
  Eigen::MatrixXd to_dense() const;

 private:
  DiscrepancyParams params_;
  SymTridiag q_time_;
  Eigen::MatrixXd r_space_;
  Eigen::MatrixXd r_space_chol_;  // lower factor of R_s
  Eigen::MatrixXd r_space_inv_;
  double r_space_log_det_ = 0.0;
};

SeparablePrecision build_separable(DiscrepancyParams params, Eigen::Index T,
                                   const Locations& locations);

// Block-tridiagonal Cholesky factor of Q_zeta + diag(shift), blocks of size n_s.
class ShiftedFactor {
 public:
  ShiftedFactor(const SeparablePrecision& prec, const Eigen::VectorXd& diag_shift);

  Eigen::Index size() const { return n_time_ * n_space_; }
  double log_det() const { return log_det_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  // Solves L^T x = z; with z ~ N(0, I) this yields x ~ N(0, (Q + S)^-1).
  Eigen::VectorXd solve_upper(const Eigen::VectorXd& z) const;

 private:
  void forward_in_place(Eigen::Ref<Eigen::MatrixXd> x) const;
  void backward_in_place(Eigen::Ref<Eigen::MatrixXd> x) const;

  Eigen::Index n_time_;
  Eigen::Index n_space_;
  std::vector<Eigen::MatrixXd> diag_;  // lower-triangular diagonal blocks L_tt
  std::vector<Eigen::MatrixXd> sub_;   // L_{t,t-1}, t >= 1 (entry 0 unused)
  double log_det_ = 0.0;
};

struct ShiftedSolve {
  Eigen::VectorXd solution;
  double log_det_shifted;
};

ShiftedSolve solve_shifted(const SeparablePrecision& prec, const Eigen::VectorXd& diag_shift,
                           const Eigen::VectorXd& rhs);

// T x n_s draw of the discrepancy via the AR(1) recursion.
Eigen::MatrixXd simulate_discrepancy(DiscrepancyParams params, Eigen::Index T,
                                     const Locations& locations, Rng& rng);

void validate(const DiscrepancyParams& params);
void validate(const FluxCorrParams& params);

}  // namespace fluxinv::covariance
