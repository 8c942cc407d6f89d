#include "fluxinv/covariance.hpp"

#include <cmath>
#include <string>

#include "fluxinv/errors.hpp"

namespace fluxinv {

double distance(const Coord& a, const Coord& b) { return std::hypot(a.lon - b.lon, a.lat - b.lat); }

Eigen::MatrixXd distance_matrix(const Locations& locations) {
  const auto n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      d(i, j) = d(j, i) = distance(locations[static_cast<std::size_t>(i)],
                                   locations[static_cast<std::size_t>(j)]);
    }
  }
  return d;
}

Eigen::MatrixXd SymTridiag::to_dense() const {
  const Eigen::Index n = size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m.diagonal() = diag;
  for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = off[i];
  return m;
}

double SymTridiag::log_det() const {
  // LDL' recursion; pivots must stay positive for an SPD matrix.
  double pivot = diag[0];
  if (!(pivot > 0.0)) throw ConditioningError("tridiagonal matrix is not positive-definite");
  double sum = std::log(pivot);
  for (Eigen::Index i = 1; i < size(); ++i) {
    pivot = diag[i] - off[i - 1] * off[i - 1] / pivot;
    if (!(pivot > 0.0)) throw ConditioningError("tridiagonal matrix is not positive-definite");
    sum += std::log(pivot);
  }
  return sum;
}

}  // namespace fluxinv

namespace fluxinv::covariance {

void validate(const DiscrepancyParams& p) {
  if (!(p.tau2 > 0.0) || !std::isfinite(p.tau2)) {
    throw ParameterError("discrepancy precision tau2 must be positive and finite");
  }
  if (!(std::abs(p.a) < 1.0)) throw ParameterError("AR(1) coefficient must satisfy |a| < 1");
  if (!(p.d > 0.0) || !std::isfinite(p.d)) throw ParameterError("e-folding length d must be positive");
}

void validate(const FluxCorrParams& p) {
  if (!(p.theta11 > 0.0) || !std::isfinite(p.theta11)) {
    throw ParameterError("theta11 must be positive and finite");
  }
  if (!(p.theta12 > 0.0 && p.theta12 < 2.0)) throw ParameterError("theta12 must lie in (0, 2)");
}

Eigen::MatrixXd powered_exp_corr(FluxCorrParams params, const Eigen::MatrixXd& distances) {
  validate(params);
  const Eigen::Index n = distances.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    r(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double u = distances(i, j);
      const double v = u > 0.0 ? std::exp(-params.theta11 * std::exp(params.theta12 * std::log(u))) : 1.0;
      r(i, j) = r(j, i) = v;
    }
  }
  return r;
}

Eigen::MatrixXd powered_exp_corr(FluxCorrParams params, const Locations& locations) {
  return powered_exp_corr(params, distance_matrix(locations));
}

Eigen::MatrixXd exponential_corr(double d, const Locations& locations) {
  if (!(d > 0.0)) throw ParameterError("exponential correlation length must be positive");
  Eigen::MatrixXd r = distance_matrix(locations);
  return (-r.array() / d).exp().matrix();
}

SymTridiag ar1_precision(double a, Eigen::Index T) {
  if (!(std::abs(a) < 1.0)) throw ParameterError("AR(1) coefficient must satisfy |a| < 1");
  if (T < 1) throw ParameterError("AR(1) precision needs T >= 1");
  SymTridiag q;
  if (T == 1) {
    q.diag = Eigen::VectorXd::Ones(1);
    q.off.resize(0);
    return q;
  }
  const double scale = 1.0 / (1.0 - a * a);
  q.diag = Eigen::VectorXd::Constant(T, (1.0 + a * a) * scale);
  q.diag[0] = q.diag[T - 1] = scale;
  q.off = Eigen::VectorXd::Constant(T - 1, -a * scale);
  return q;
}

Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd jittered = m;
  jittered.diagonal().array() += 1e-10;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError(std::string("Cholesky factorization failed: ") + what);
  }
  return llt;
}

SeparablePrecision::SeparablePrecision(DiscrepancyParams params, SymTridiag q_time,
                                       Eigen::MatrixXd r_space)
    : params_(params), q_time_(std::move(q_time)), r_space_(std::move(r_space)) {
  validate(params_);
  const auto llt = robust_llt(r_space_, "spatial discrepancy correlation");
  r_space_chol_ = llt.matrixL();
  r_space_inv_ = llt.solve(Eigen::MatrixXd::Identity(r_space_.rows(), r_space_.cols()));
  r_space_log_det_ = 2.0 * r_space_chol_.diagonal().array().log().sum();
}

double SeparablePrecision::log_det() const {
  const auto ns = static_cast<double>(n_space());
  const auto nt = static_cast<double>(n_time());
  return ns * nt * std::log(params_.tau2) + ns * q_time_.log_det() - nt * r_space_log_det_;
}

Eigen::MatrixXd SeparablePrecision::apply(const Eigen::MatrixXd& x) const {
  // Each column of x is reshaped to n_s x T; Q x = tau2 * R^-1 X Q_t.
  const Eigen::Index ns = n_space();
  const Eigen::Index nt = n_time();
  Eigen::MatrixXd out(x.rows(), x.cols());
  Eigen::MatrixXd xq(ns, nt);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> xm(x.col(c).data(), ns, nt);
    for (Eigen::Index t = 0; t < nt; ++t) {
      xq.col(t) = q_time_.diag[t] * xm.col(t);
      if (t > 0) xq.col(t) += q_time_.off[t - 1] * xm.col(t - 1);
      if (t + 1 < nt) xq.col(t) += q_time_.off[t] * xm.col(t + 1);
    }
    Eigen::Map<Eigen::MatrixXd> om(out.col(c).data(), ns, nt);
    om.noalias() = params_.tau2 * r_space_inv_ * xq;
  }
  return out;
}

Eigen::VectorXd SeparablePrecision::apply(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd m = x;
  return apply(m).col(0);
}

double SeparablePrecision::quadform(const Eigen::VectorXd& x) const { return x.dot(apply(x)); }

Eigen::MatrixXd SeparablePrecision::to_dense() const {
  const Eigen::Index ns = n_space();
  const Eigen::Index nt = n_time();
  const Eigen::MatrixXd qt = q_time_.to_dense();
  Eigen::MatrixXd q(ns * nt, ns * nt);
  for (Eigen::Index t = 0; t < nt; ++t) {
    for (Eigen::Index u = 0; u < nt; ++u) {
      q.block(t * ns, u * ns, ns, ns) = params_.tau2 * qt(t, u) * r_space_inv_;
    }
  }
  return q;
}

SeparablePrecision build_separable(DiscrepancyParams params, Eigen::Index T,
                                   const Locations& locations) {
  validate(params);
  return SeparablePrecision(params, ar1_precision(params.a, T), exponential_corr(params.d, locations));
}

namespace {

// Factor blocks; returns false (leaving partial state) if any block fails.
bool factor_blocks(const SeparablePrecision& prec, const Eigen::VectorXd& shift, double jitter,
                   std::vector<Eigen::MatrixXd>& diag, std::vector<Eigen::MatrixXd>& sub,
                   double& log_det) {
  const Eigen::Index ns = prec.n_space();
  const Eigen::Index nt = prec.n_time();
  const auto& qt = prec.q_time();
  const Eigen::MatrixXd rinv = prec.tau2() * prec.r_space_inv();
  diag.assign(static_cast<std::size_t>(nt), Eigen::MatrixXd());
  sub.assign(static_cast<std::size_t>(nt), Eigen::MatrixXd());
  log_det = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(ns);
  for (Eigen::Index t = 0; t < nt; ++t) {
    Eigen::MatrixXd block = qt.diag[t] * rinv;
    block.diagonal() += shift.segment(t * ns, ns);
    block.diagonal().array() += jitter;
    const auto ti = static_cast<std::size_t>(t);
    if (t > 0) {
      // L_{t,t-1} = E L_{t-1,t-1}^-T with E = q_off * tau2 R^-1 symmetric.
      Eigen::MatrixXd m = qt.off[t - 1] * rinv;
      diag[ti - 1].triangularView<Eigen::Lower>().solveInPlace(m);
      sub[ti] = m.transpose();
      block.noalias() -= sub[ti] * sub[ti].transpose();
    }
    llt.compute(block);
    if (llt.info() != Eigen::Success) return false;
    diag[ti] = llt.matrixL();
    log_det += 2.0 * diag[ti].diagonal().array().log().sum();
  }
  return std::isfinite(log_det);
}

}  // namespace

ShiftedFactor::ShiftedFactor(const SeparablePrecision& prec, const Eigen::VectorXd& diag_shift)
    : n_time_(prec.n_time()), n_space_(prec.n_space()) {
  if (diag_shift.size() != prec.size()) {
    throw DomainError("diagonal shift has length " + std::to_string(diag_shift.size()) +
                      ", expected " + std::to_string(prec.size()));
  }
  if ((diag_shift.array() < 0.0).any()) throw DomainError("diagonal shift must be non-negative");
  if (!factor_blocks(prec, diag_shift, 0.0, diag_, sub_, log_det_) &&
      !factor_blocks(prec, diag_shift, 1e-10, diag_, sub_, log_det_)) {
    throw ConditioningError("block-tridiagonal Cholesky of the shifted discrepancy precision failed");
  }
}

void ShiftedFactor::forward_in_place(Eigen::Ref<Eigen::MatrixXd> x) const {
  const Eigen::Index ns = n_space_;
  for (Eigen::Index t = 0; t < n_time_; ++t) {
    auto xt = x.middleRows(t * ns, ns);
    const auto ti = static_cast<std::size_t>(t);
    if (t > 0) xt.noalias() -= sub_[ti] * x.middleRows((t - 1) * ns, ns);
    diag_[ti].triangularView<Eigen::Lower>().solveInPlace(xt);
  }
}

void ShiftedFactor::backward_in_place(Eigen::Ref<Eigen::MatrixXd> x) const {
  const Eigen::Index ns = n_space_;
  for (Eigen::Index t = n_time_ - 1; t >= 0; --t) {
    auto xt = x.middleRows(t * ns, ns);
    const auto ti = static_cast<std::size_t>(t);
    if (t + 1 < n_time_) xt.noalias() -= sub_[ti + 1].transpose() * x.middleRows((t + 1) * ns, ns);
    diag_[ti].transpose().triangularView<Eigen::Upper>().solveInPlace(xt);
  }
}

Eigen::MatrixXd ShiftedFactor::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != size()) throw DomainError("right-hand side has the wrong length");
  Eigen::MatrixXd x = rhs;
  forward_in_place(x);
  backward_in_place(x);
  return x;
}

Eigen::VectorXd ShiftedFactor::solve(const Eigen::VectorXd& rhs) const {
  Eigen::MatrixXd m = rhs;
  return solve(m).col(0);
}

Eigen::VectorXd ShiftedFactor::solve_upper(const Eigen::VectorXd& z) const {
  if (z.size() != size()) throw DomainError("right-hand side has the wrong length");
  Eigen::MatrixXd x = z;
  backward_in_place(x);
  return x.col(0);
}

ShiftedSolve solve_shifted(const SeparablePrecision& prec, const Eigen::VectorXd& diag_shift,
                           const Eigen::VectorXd& rhs) {
  const ShiftedFactor factor(prec, diag_shift);
  return {factor.solve(rhs), factor.log_det()};
}

Eigen::MatrixXd simulate_discrepancy(DiscrepancyParams params, Eigen::Index T,
                                     const Locations& locations, Rng& rng) {
  validate(params);
  if (T < 1) throw ParameterError("simulate_discrepancy needs T >= 1");
  const auto ns = static_cast<Eigen::Index>(locations.size());
  const auto llt = robust_llt(exponential_corr(params.d, locations), "spatial discrepancy correlation");
  const Eigen::MatrixXd chol = llt.matrixL();
  const double marginal_sd = 1.0 / std::sqrt(params.tau2);
  const double innovation_sd = std::sqrt(1.0 - params.a * params.a) * marginal_sd;

  Eigen::MatrixXd zeta(T, ns);
  Eigen::VectorXd z(ns);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < ns; ++s) z[s] = std_normal(rng);
    if (t == 0) {
      zeta.row(0) = (marginal_sd * (chol * z)).transpose();
    } else {
      zeta.row(t) = params.a * zeta.row(t - 1) + (innovation_sd * (chol * z)).transpose();
    }
  }
  return zeta;
}

}  // namespace fluxinv::covariance
