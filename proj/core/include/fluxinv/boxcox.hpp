#pragma once

#include <Eigen/Core>

namespace fluxinv::boxcox {

// |lambda| below this threshold is evaluated on the analytic log branch.
inline constexpr double kLambdaEps = 1e-8;

struct BoxCoxParam {
  double lambda = 0.0;
};

inline bool is_log_branch(BoxCoxParam p) { return p.lambda < kLambdaEps && p.lambda > -kLambdaEps; }

// g_lambda(y) = (y^lambda - 1) / lambda, or ln y on the log branch. Throws DomainError for y <= 0.
double forward(double y, BoxCoxParam p);
Eigen::VectorXd forward(const Eigen::VectorXd& y, BoxCoxParam p);

// (lambda g + 1)^(1/lambda). Throws DomainError when g lies outside the image of g_lambda.
double inverse(double g, BoxCoxParam p);
Eigen::VectorXd inverse(const Eigen::VectorXd& g, BoxCoxParam p);

// sum_i (lambda - 1) ln y_i, the log of the transformation Jacobian.
double log_jacobian(const Eigen::VectorXd& y, BoxCoxParam p);

struct Derivatives {
  double first;   // y^(lambda-1)
  double second;  // (lambda-1) y^(lambda-2)
};

Derivatives derivatives(double y, BoxCoxParam p);

// True iff every element lies in the truncation region T_lambda.
bool truncation_ok(const Eigen::VectorXd& g, BoxCoxParam p);
bool in_truncation_region(double g, BoxCoxParam p);

}  // namespace fluxinv::boxcox
