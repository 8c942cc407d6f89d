#include "fluxinv/boxcox.hpp"

#include <cmath>
#include <string>

#include "fluxinv/errors.hpp"

namespace fluxinv::boxcox {

namespace {

void require_positive(double y, const char* where) {
  if (!(y > 0.0)) {
    throw DomainError(std::string(where) + ": Box-Cox argument must be positive, got " +
                      std::to_string(y));
  }
}

}  // namespace

double forward(double y, BoxCoxParam p) {
  require_positive(y, "boxcox::forward");
  const double log_y = std::log(y);
  if (is_log_branch(p)) return log_y;
  // expm1 keeps full relative precision when lambda * ln y is small.
  return std::expm1(p.lambda * log_y) / p.lambda;
}

Eigen::VectorXd forward(const Eigen::VectorXd& y, BoxCoxParam p) {
  Eigen::VectorXd g(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) g[i] = forward(y[i], p);
  return g;
}

bool in_truncation_region(double g, BoxCoxParam p) {
  if (!std::isfinite(g)) return false;
  if (is_log_branch(p)) return true;
  const double bound = -1.0 / p.lambda;
  return p.lambda > 0.0 ? g > bound : g < bound;
}

double inverse(double g, BoxCoxParam p) {
  if (is_log_branch(p)) {
    if (!std::isfinite(g)) throw DomainError("boxcox::inverse: non-finite argument");
    return std::exp(g);
  }
  if (!in_truncation_region(g, p)) {
    throw DomainError("boxcox::inverse: " + std::to_string(g) +
                      " lies outside the image of g_lambda for lambda = " +
                      std::to_string(p.lambda));
  }
  return std::exp(std::log1p(p.lambda * g) / p.lambda);
}

Eigen::VectorXd inverse(const Eigen::VectorXd& g, BoxCoxParam p) {
  Eigen::VectorXd y(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) y[i] = inverse(g[i], p);
  return y;
}

double log_jacobian(const Eigen::VectorXd& y, BoxCoxParam p) {
  double sum_log = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    require_positive(y[i], "boxcox::log_jacobian");
    sum_log += std::log(y[i]);
  }
  return (p.lambda - 1.0) * sum_log;
}

Derivatives derivatives(double y, BoxCoxParam p) {
  require_positive(y, "boxcox::derivatives");
  const double first = std::pow(y, p.lambda - 1.0);
  return {first, (p.lambda - 1.0) * first / y};
}

bool truncation_ok(const Eigen::VectorXd& g, BoxCoxParam p) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!in_truncation_region(g[i], p)) return false;
  }
  return true;
}

}  // namespace fluxinv::boxcox
