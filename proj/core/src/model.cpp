#include "fluxinv/model.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include "fluxinv/errors.hpp"

namespace fluxinv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMinS2 = 1e-300;
constexpr double kRelS2Floor = 1e-20;

template <class Ids>
std::optional<Eigen::Index> find_id(const Ids& ids, const std::string& id) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

template <class Ids>
void check_unique(const Ids& ids, const char* what) {
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ParameterError(std::string("duplicate ") + what + " id '" + id + "'");
  }
}

void check_interval(const Interval& iv, const char* name) {
  if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
    throw ParameterError(std::string("prior bounds for ") + name + " must satisfy lo < hi");
  }
}

}  // namespace

std::optional<Eigen::Index> SpatialGrid::index_of(const std::string& cell_id) const {
  return find_id(cell_ids, cell_id);
}

void SpatialGrid::validate() const {
  const Eigen::Index n = size();
  if (n == 0) throw ParameterError("grid has no cells");
  if (static_cast<Eigen::Index>(coords.size()) != n || weights.size() != n || covariates.rows() != n) {
    throw ParameterError("grid fields have inconsistent lengths");
  }
  check_unique(cell_ids, "cell");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw ParameterError("grid weight for cell '" + cell_ids[static_cast<std::size_t>(i)] + "' must be positive");
    }
  }
  if (covariates.cols() < 1) throw ParameterError("grid needs at least one covariate");
  if (!covariates.allFinite()) throw ParameterError("grid covariates must be finite");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(covariates);
  if (qr.rank() < covariates.cols()) throw ConditioningError("covariate matrix X is rank deficient");
}

std::optional<Eigen::Index> StationSet::index_of(const std::string& station_id) const {
  return find_id(ids, station_id);
}

void StationSet::validate() const {
  if (ids.empty()) throw ParameterError("at least one station is required");
  if (coords.size() != ids.size()) throw ParameterError("station ids and coordinates differ in length");
  check_unique(ids, "station");
}

Eigen::MatrixXd SensitivityStack::stacked() const {
  const Eigen::Index ns = n_stations();
  Eigen::MatrixXd b(n_time() * ns, n_cells());
  for (Eigen::Index t = 0; t < n_time(); ++t) b.middleRows(t * ns, ns) = per_time[static_cast<std::size_t>(t)];
  return b;
}

void SensitivityStack::validate() const {
  if (per_time.empty()) throw ParameterError("sensitivity stack needs T >= 1");
  const auto rows = per_time.front().rows();
  const auto cols = per_time.front().cols();
  for (const auto& b : per_time) {
    if (b.rows() != rows || b.cols() != cols) throw ParameterError("sensitivity matrices differ in shape");
    if (!b.allFinite()) throw ParameterError("sensitivity matrices must be finite");
  }
}

void ObservationSet::validate(Eigen::Index n_time, Eigen::Index n_stations) const {
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  for (const auto& r : readings) {
    if (r.t < 0 || r.t >= n_time) throw ParameterError("observation time index out of range");
    if (r.station < 0 || r.station >= n_stations) throw ParameterError("observation station out of range");
    if (!(r.variance > 0.0) || !std::isfinite(r.variance)) throw ParameterError("observation variance must be positive");
    if (!std::isfinite(r.value)) throw ParameterError("observation value must be finite");
    if (!seen.emplace(r.t, r.station).second) {
      throw ParameterError("duplicate observation at t=" + std::to_string(r.t + 1) + ", station " +
                           std::to_string(r.station));
    }
  }
}

void PriorBounds::validate() const {
  check_interval(log_inv_tau2, "ln(1/tau2)");
  check_interval(a, "a");
  check_interval(log_d, "ln d");
  check_interval(theta11, "theta11");
  check_interval(theta12, "theta12");
  check_interval(lambda, "lambda");
  if (a.lo < -1.0 || a.hi > 1.0) throw ParameterError("bounds for a must lie within (-1, 1)");
  if (theta12.lo < 0.0 || theta12.hi > 2.0) throw ParameterError("bounds for theta12 must lie within (0, 2)");
  if (theta11.lo < 0.0) throw ParameterError("bounds for theta11 must be non-negative");
}

bool PriorBounds::contains(const DiscrepancyParams& p) const {
  if (!(p.tau2 > 0.0) || !(p.d > 0.0)) return false;
  return log_inv_tau2.contains(-std::log(p.tau2)) && a.contains(p.a) && log_d.contains(std::log(p.d));
}

bool PriorBounds::contains(const FluxCorrParams& p) const {
  return theta11.contains(p.theta11) && theta12.contains(p.theta12);
}

Eigen::Vector3d to_sampling_coords(const DiscrepancyParams& p) {
  return {-std::log(p.tau2), p.a, std::log(p.d)};
}

DiscrepancyParams from_sampling_coords(const Eigen::Vector3d& c) {
  return {std::exp(-c[0]), c[1], std::exp(c[2])};
}

HierarchicalModel::HierarchicalModel(SpatialGrid grid, StationSet stations, SensitivityStack sensitivities,
                                     ObservationSet observations, Eigen::VectorXd inventory, PriorBounds bounds,
                                     FluxCorrelation flux_correlation)
    : grid_(std::move(grid)),
      stations_(std::move(stations)),
      sensitivities_(std::move(sensitivities)),
      observations_(std::move(observations)),
      inventory_(std::move(inventory)),
      bounds_(bounds),
      flux_correlation_(flux_correlation) {
  grid_.validate();
  stations_.validate();
  sensitivities_.validate();
  bounds_.validate();
  if (sensitivities_.n_stations() != stations_.size()) {
    throw ParameterError("sensitivity rows do not match the station count");
  }
  if (sensitivities_.n_cells() != grid_.size()) throw ParameterError("sensitivity columns do not match the grid");
  if (inventory_.size() != grid_.size()) throw ParameterError("inventory length does not match the grid");
  for (Eigen::Index i = 0; i < inventory_.size(); ++i) {
    if (!(inventory_[i] > 0.0) || !std::isfinite(inventory_[i])) {
      throw ParameterError("inventory flux must be positive for cell '" +
                           grid_.cell_ids[static_cast<std::size_t>(i)] + "'");
    }
  }
  observations_.validate(n_time(), n_stations());

  b_stacked_ = sensitivities_.stacked();
  obs_precision_ = Eigen::VectorXd::Zero(n_slots());
  obs_weighted_ = Eigen::VectorXd::Zero(n_slots());
  for (const auto& r : observations_.readings) {
    const Eigen::Index k = slot(r.t, r.station);
    obs_precision_[k] = 1.0 / r.variance;
    obs_weighted_[k] = r.value / r.variance;
  }
  cell_distances_ = distance_matrix(grid_.coords);
}

Eigen::MatrixXd HierarchicalModel::flux_correlation_matrix(const FluxCorrParams& theta1) const {
  if (flux_correlation_ == FluxCorrelation::identity) return Eigen::MatrixXd::Identity(n_cells(), n_cells());
  return covariance::powered_exp_corr(theta1, cell_distances_);
}

covariance::SeparablePrecision HierarchicalModel::discrepancy_precision(const DiscrepancyParams& p) const {
  return covariance::build_separable(p, n_time(), stations_.coords);
}

HierarchicalModel HierarchicalModel::with_inventory(Eigen::VectorXd inventory) const {
  return HierarchicalModel(grid_, stations_, sensitivities_, observations_, std::move(inventory), bounds_,
                           flux_correlation_);
}

HierarchicalModel HierarchicalModel::with_flux_correlation(FluxCorrelation c) const {
  return HierarchicalModel(grid_, stations_, sensitivities_, observations_, inventory_, bounds_, c);
}

Eigen::VectorXd gls_beta(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, const InverseApply& r_inv) {
  const Eigen::MatrixXd rx = r_inv(x);
  const Eigen::MatrixXd xrx = x.transpose() * rx;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xrx);
  if (qr.rank() < xrx.cols()) throw ConditioningError("X' R^-1 X is rank deficient");
  return qr.solve(rx.transpose() * g);
}

double sum_sq_residuals(const Eigen::VectorXd& g, const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& x,
                        const InverseApply& r_inv) {
  const Eigen::VectorXd r = g - x * beta_hat;
  const Eigen::VectorXd rr = r_inv(r);
  return std::max(0.0, r.dot(rr));
}

double psi_quadform(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, const InverseApply& r_inv) {
  const Eigen::VectorXd rg = r_inv(g);
  const Eigen::MatrixXd rx = r_inv(x);
  const Eigen::MatrixXd xrx = x.transpose() * rx;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xrx);
  if (qr.rank() < xrx.cols()) throw ConditioningError("X' R^-1 X is rank deficient");
  const Eigen::VectorXd u = rx.transpose() * g;
  return g.dot(rg) - u.dot(qr.solve(u));
}

FluxFieldPrior::FluxFieldPrior(const HierarchicalModel& model, const FluxCorrParams& theta1)
    : n_(model.n_cells()),
      identity_(model.flux_correlation() == FluxCorrelation::identity),
      x_(model.grid().covariates) {
  if (identity_) {
    r_inv_x_ = x_;
    log_det_r_ = 0.0;
  } else {
    r_llt_ = covariance::robust_llt(model.flux_correlation_matrix(theta1), "flux correlation R(theta1)");
    r_inv_x_ = r_llt_.solve(x_);
    log_det_r_ = 2.0 * r_llt_.matrixLLT().diagonal().array().log().sum();
  }
  const Eigen::MatrixXd m = 2.0 * (x_.transpose() * r_inv_x_);
  xrx_llt_ = covariance::robust_llt(m, "X' R^-1 X");
  log_det_xrx_ = 2.0 * xrx_llt_.matrixLLT().diagonal().array().log().sum();
}

FluxFieldPrior::Residuals FluxFieldPrior::residuals(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2,
                                                    bool want_psi_g1) const {
  const Eigen::VectorXd beta = xrx_llt_.solve(r_inv_x_.transpose() * (g1 + g2));
  const Eigen::VectorXd xb = x_ * beta;
  const Eigen::VectorXd r1 = g1 - xb;
  const Eigen::VectorXd r2 = g2 - xb;
  Residuals out;
  if (identity_) {
    out.s2 = r1.squaredNorm() + r2.squaredNorm();
    if (want_psi_g1) out.psi_g1 = r1;
  } else {
    Eigen::VectorXd rr1 = r_llt_.solve(r1);
    out.s2 = r1.dot(rr1) + r2.dot(r_llt_.solve(r2));
    if (want_psi_g1) out.psi_g1 = std::move(rr1);
  }
  // Below the relative floor the residual is rounding noise: the fit is exact.
  const double floor = std::max(kMinS2, kRelS2Floor * (g1.squaredNorm() + g2.squaredNorm()));
  if (!(out.s2 > floor)) {
    throw ImproprietyError("sum of squared residuals S^2 is zero: transformed fields lie in the span of X");
  }
  return out;
}

FluxLikelihood::FluxLikelihood(const HierarchicalModel& model, const DiscrepancyParams& disc) {
  const Eigen::Index n1 = model.n_cells();
  if (model.observations().size() == 0) {
    h_mat_ = Eigen::MatrixXd::Zero(n1, n1);
    h_vec_ = Eigen::VectorXd::Zero(n1);
    return;
  }
  const covariance::SeparablePrecision q = model.discrepancy_precision(disc);
  const covariance::ShiftedFactor factor(q, model.obs_precision());
  const Eigen::MatrixXd& b = model.stacked_sensitivities();
  const Eigen::MatrixXd qb = q.apply(b);
  const Eigen::MatrixXd a_inv_qb = factor.solve(qb);
  h_mat_ = b.transpose() * qb - qb.transpose() * a_inv_qb;
  h_mat_ = 0.5 * (h_mat_ + h_mat_.transpose()).eval();
  h_vec_ = a_inv_qb.transpose() * model.obs_weighted_data();
}

double FluxLikelihood::value(const Eigen::VectorXd& y1) const {
  return -0.5 * y1.dot(h_mat_ * y1) + y1.dot(h_vec_);
}

Eigen::VectorXd FluxLikelihood::gradient(const Eigen::VectorXd& y1) const { return h_vec_ - h_mat_ * y1; }

FluxConditional::FluxConditional(const HierarchicalModel& model, const DiscrepancyParams& disc,
                                 const FluxCorrParams& theta1, boxcox::BoxCoxParam lambda)
    : model_(&model), lambda_(lambda) {
  owned_likelihood_.emplace(model, disc);
  owned_prior_.emplace(model, theta1);
  likelihood_ = &*owned_likelihood_;
  prior_ = &*owned_prior_;
  g2_ = boxcox::forward(model.inventory(), lambda);
  log_jac_w1_ = boxcox::log_jacobian(model.inventory(), lambda);
}

FluxConditional::FluxConditional(const HierarchicalModel& model, const FluxLikelihood& likelihood,
                                 const FluxFieldPrior& prior, boxcox::BoxCoxParam lambda)
    : model_(&model), likelihood_(&likelihood), prior_(&prior), lambda_(lambda) {
  g2_ = boxcox::forward(model.inventory(), lambda);
  log_jac_w1_ = boxcox::log_jacobian(model.inventory(), lambda);
}

double FluxConditional::value(const Eigen::VectorXd& y1, Eigen::VectorXd* gradient) const {
  if (y1.size() != model_->n_cells()) throw ParameterError("flux vector length does not match the grid");
  if (!y1.allFinite() || (y1.array() <= 0.0).any()) return kNegInf;
  const Eigen::VectorXd g1 = boxcox::forward(y1, lambda_);
  if (!boxcox::truncation_ok(g1, lambda_)) return kNegInf;

  const auto n1 = static_cast<double>(model_->n_cells());
  const auto res = prior_->residuals(g1, g2_, gradient != nullptr);
  const double lj = boxcox::log_jacobian(y1, lambda_);
  const double v = likelihood_->value(y1) - n1 * std::log(0.5 * res.s2) + lj + log_jac_w1_;

  if (gradient != nullptr) {
    // dg/dy = y^(lambda-1); the Jacobian term differentiates to (lambda-1)/y.
    const Eigen::ArrayXd y = y1.array();
    const Eigen::ArrayXd g_first = boxcox::is_log_branch(lambda_) ? y.inverse().eval()
                                                                  : y.pow(lambda_.lambda - 1.0).eval();
    *gradient = likelihood_->gradient(y1);
    gradient->array() -= (2.0 * n1 / res.s2) * g_first * res.psi_g1.array();
    gradient->array() += (lambda_.lambda - 1.0) / y;
  }
  return v;
}

DiscrepancyConditional::DiscrepancyConditional(const HierarchicalModel& model, const Eigen::VectorXd& y1)
    : model_(&model), by1_(model.stacked_sensitivities() * y1) {
  if (y1.size() != model.n_cells()) throw ParameterError("flux vector length does not match the grid");
}

double DiscrepancyConditional::operator()(const DiscrepancyParams& p) const {
  if (!model_->bounds().contains(p)) return kNegInf;
  // With no readings A = Q and D = Q B Y1, and every term cancels.
  if (model_->observations().size() == 0) return 0.0;
  const covariance::SeparablePrecision q = model_->discrepancy_precision(p);
  const Eigen::VectorXd qby = q.apply(by1_);
  double v = 0.5 * q.log_det() - 0.5 * by1_.dot(qby);
  const covariance::ShiftedFactor factor(q, model_->obs_precision());
  const Eigen::VectorXd dvec = model_->obs_weighted_data() + qby;
  v += -0.5 * factor.log_det() + 0.5 * dvec.dot(factor.solve(dvec));
  return v;
}

double log_cond_discrepancy(const DiscrepancyParams& params, const HierarchicalModel& model,
                            const Eigen::VectorXd& y1) {
  return DiscrepancyConditional(model, y1)(params);
}

double log_cond_flux(const Eigen::VectorXd& y1, const HierarchicalModel& model, const DiscrepancyParams& disc,
                     const FluxCorrParams& theta1, boxcox::BoxCoxParam lambda) {
  return FluxConditional(model, disc, theta1, lambda).value(y1);
}

Eigen::VectorXd grad_log_cond_flux(const Eigen::VectorXd& y1, const HierarchicalModel& model,
                                   const DiscrepancyParams& disc, const FluxCorrParams& theta1,
                                   boxcox::BoxCoxParam lambda) {
  Eigen::VectorXd grad;
  const double v = FluxConditional(model, disc, theta1, lambda).value(y1, &grad);
  if (!std::isfinite(v)) throw DomainError("gradient requested outside the flux support");
  return grad;
}

double log_cond_fluxparams(const FluxFieldPrior& prior, boxcox::BoxCoxParam lambda, const Eigen::VectorXd& y1,
                           const Eigen::VectorXd& w1) {
  if ((y1.array() <= 0.0).any() || (w1.array() <= 0.0).any()) return kNegInf;
  const Eigen::VectorXd g1 = boxcox::forward(y1, lambda);
  const Eigen::VectorXd g2 = boxcox::forward(w1, lambda);
  if (!boxcox::truncation_ok(g1, lambda) || !boxcox::truncation_ok(g2, lambda)) return kNegInf;
  const auto n1 = static_cast<double>(prior.n_cells());
  const double s2 = prior.residuals(g1, g2, false).s2;
  // ln|R_| = 2 ln|R| for the two identical diagonal blocks.
  return -prior.log_det_r() - 0.5 * prior.log_det_xrx() - n1 * std::log(s2) + boxcox::log_jacobian(y1, lambda) +
         boxcox::log_jacobian(w1, lambda);
}

double log_cond_fluxparams(const FluxCorrParams& theta1, boxcox::BoxCoxParam lambda, const Eigen::VectorXd& y1,
                           const Eigen::VectorXd& w1, const HierarchicalModel& model) {
  const auto& b = model.bounds();
  if (!b.lambda.contains(lambda.lambda)) return kNegInf;
  if (model.flux_correlation() == FluxCorrelation::powered_exponential && !b.contains(theta1)) return kNegInf;
  return log_cond_fluxparams(FluxFieldPrior(model, theta1), lambda, y1, w1);
}

}  // namespace fluxinv
