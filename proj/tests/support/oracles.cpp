#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace fluxinv::fixtures::dense {

namespace {

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  return ldlt.vectorD().array().log().sum();
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return k;
}

double dist(const Coord& p, const Coord& q) {
  return std::sqrt((p.lon - q.lon) * (p.lon - q.lon) + (p.lat - q.lat) * (p.lat - q.lat));
}

}  // namespace

Eigen::MatrixXd ar1_cov(double a, Eigen::Index T) {
  Eigen::MatrixXd s(T, T);
  for (Eigen::Index i = 0; i < T; ++i) {
    for (Eigen::Index j = 0; j < T; ++j) s(i, j) = std::pow(a, static_cast<double>(std::abs(i - j)));
  }
  return s;
}

Eigen::MatrixXd station_corr(double d, const Locations& locs) {
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) r(i, j) = std::exp(-dist(locs[i], locs[j]) / d);
  }
  return r;
}

Eigen::MatrixXd powered_exp(const FluxCorrParams& theta, const Locations& locs) {
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) r(i, j) = std::exp(-theta.theta11 * std::pow(dist(locs[i], locs[j]), theta.theta12));
  }
  return r;
}

Eigen::MatrixXd discrepancy_cov(const DiscrepancyParams& p, Eigen::Index T, const Locations& locs) {
  return kron(ar1_cov(p.a, T), station_corr(p.d, locs)) / p.tau2;
}

double boxcox(double y, double lambda) {
  return lambda == 0.0 ? std::log(y) : (std::pow(y, lambda) - 1.0) / lambda;
}

ObsSystem observation_system(const HierarchicalModel& model) {
  const auto& r = model.observations().readings;
  ObsSystem o;
  const auto m = static_cast<Eigen::Index>(r.size());
  o.c = Eigen::MatrixXd::Zero(m, model.n_slots());
  o.z.resize(m);
  o.v = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    o.c(k, r[k].t * model.n_stations() + r[k].station) = 1.0;
    o.z[k] = r[k].value;
    o.v(k, k) = r[k].variance;
  }
  return o;
}

double log_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd r = x - mean;
  const Eigen::MatrixXd inv = cov.inverse();
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det_spd(cov) -
         0.5 * r.dot(inv * r);
}

double log_marginal_z(const HierarchicalModel& model, const DiscrepancyParams& p, const Eigen::VectorXd& y1) {
  const ObsSystem o = observation_system(model);
  const Eigen::MatrixXd sigma = discrepancy_cov(p, model.n_time(), model.stations().coords);
  Eigen::MatrixXd b(model.n_slots(), model.n_cells());
  for (Eigen::Index t = 0; t < model.n_time(); ++t) {
    b.middleRows(t * model.n_stations(), model.n_stations()) = model.sensitivities().per_time[t];
  }
  return log_mvn(o.z, o.c * b * y1, o.c * sigma * o.c.transpose() + o.v);
}

namespace {

struct Stacked {
  Eigen::VectorXd g;
  Eigen::MatrixXd x;
  Eigen::MatrixXd r;
  double log_jac = 0.0;
};

Stacked stack(const HierarchicalModel& model, const FluxCorrParams& theta, double lambda, const Eigen::VectorXd& y1) {
  const Eigen::Index n = model.n_cells();
  const Eigen::VectorXd& w1 = model.inventory();
  Stacked s;
  s.g.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.g[i] = boxcox(y1[i], lambda);
    s.g[n + i] = boxcox(w1[i], lambda);
    s.log_jac += (lambda - 1.0) * (std::log(y1[i]) + std::log(w1[i]));
  }
  const auto& x = model.grid().covariates;
  s.x.resize(2 * n, x.cols());
  s.x << x, x;
  const Eigen::MatrixXd r = model.flux_correlation() == FluxCorrelation::identity
                                ? Eigen::MatrixXd::Identity(n, n).eval()
                                : powered_exp(theta, model.grid().coords);
  s.r = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  s.r.topLeftCorner(n, n) = r;
  s.r.bottomRightCorner(n, n) = r;
  return s;
}

}  // namespace

double log_flux_field(const HierarchicalModel& model, const FluxCorrParams& theta, double lambda,
                      const Eigen::VectorXd& y1) {
  const Stacked s = stack(model, theta, lambda, y1);
  const Eigen::MatrixXd rinv = s.r.inverse();
  const Eigen::MatrixXd m = s.x.transpose() * rinv * s.x;
  const Eigen::VectorXd beta = m.inverse() * (s.x.transpose() * rinv * s.g);
  const Eigen::VectorXd res = s.g - s.x * beta;
  const double s2 = res.dot(rinv * res);
  const double n1 = static_cast<double>(model.n_cells());
  return -0.5 * log_det_spd(s.r) - 0.5 * log_det_spd(m) - n1 * std::log(s2 / 2.0) + s.log_jac;
}

double log_flux_field_quadrature(const HierarchicalModel& model, const FluxCorrParams& theta, double lambda,
                                 const Eigen::VectorXd& y1) {
  const Stacked s = stack(model, theta, lambda, y1);
  const double n = static_cast<double>(s.g.size());
  const double p = static_cast<double>(s.x.cols());
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::MatrixXd rinv = s.r.inverse();
  // ln of the integrand over s = ln tau1, including d tau1 = tau1 ds.
  auto log_integrand = [&](double ls) {
    const double tau = std::exp(ls);
    const Eigen::MatrixXd prec = tau * rinv;
    const Eigen::MatrixXd m = s.x.transpose() * prec * s.x;
    const Eigen::VectorXd b = s.x.transpose() * prec * s.g;
    const double log_gauss_beta = -0.5 * n * std::log(two_pi) + 0.5 * log_det_spd(prec) - 0.5 * s.g.dot(prec * s.g) +
                                  0.5 * b.dot(m.ldlt().solve(b)) + 0.5 * p * std::log(two_pi) - 0.5 * log_det_spd(m);
    return log_gauss_beta + (0.5 * p - 1.0) * ls + ls;
  };
  const int k = 8000;
  const double lo = -60.0;
  const double hi = 60.0;
  const double h = (hi - lo) / k;
  std::vector<double> vals(k + 1);
  double mx = -1e300;
  for (int i = 0; i <= k; ++i) {
    vals[i] = log_integrand(lo + i * h);
    mx = std::max(mx, vals[i]);
  }
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double w = (i == 0 || i == k) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * std::exp(vals[i] - mx);
  }
  return mx + std::log(sum * h / 3.0) + s.log_jac;
}

Conditional molefraction(const HierarchicalModel& model, const DiscrepancyParams& p, const Eigen::VectorXd& y1) {
  const ObsSystem o = observation_system(model);
  const Eigen::MatrixXd sigma = discrepancy_cov(p, model.n_time(), model.stations().coords);
  Eigen::MatrixXd b(model.n_slots(), model.n_cells());
  for (Eigen::Index t = 0; t < model.n_time(); ++t) {
    b.middleRows(t * model.n_stations(), model.n_stations()) = model.sensitivities().per_time[t];
  }
  const Eigen::VectorXd prior_mean = b * y1;
  Conditional c;
  if (o.z.size() == 0) {
    c.mean = prior_mean;
    c.cov = sigma;
    return c;
  }
  const Eigen::MatrixXd s_zz = o.c * sigma * o.c.transpose() + o.v;
  const Eigen::MatrixXd gain = sigma * o.c.transpose() * s_zz.inverse();
  c.mean = prior_mean + gain * (o.z - o.c * prior_mean);
  c.cov = sigma - gain * o.c * sigma;
  return c;
}

}  // namespace fluxinv::fixtures::dense
