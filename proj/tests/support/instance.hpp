#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fluxinv/model.hpp"
#include "fluxinv/osse.hpp"
#include "fluxinv/rng.hpp"

namespace fluxinv::fixtures {

struct InstanceOptions {
  double missing_fraction = 0.25;
  double obs_variance = 1.0;
  DiscrepancyParams truth{0.01, 0.9, 2.5};
  FluxCorrelation correlation = FluxCorrelation::powered_exponential;
  bool with_observations = true;
};

struct Instance {
  HierarchicalModel model;
  Eigen::VectorXd y1_true;
  osse::SimulatedData data;
};

// Small random instance: irregular cell layout, two-column latitude design,
// plume sensitivities, AR(1) discrepancy and Gaussian noise.
Instance make_instance(Eigen::Index n1, Eigen::Index ns, Eigen::Index T, std::uint64_t seed,
                       const InstanceOptions& opt = {});

// Random interior point of the parameter space used by property tests.
struct ParamPoint {
  DiscrepancyParams disc;
  FluxCorrParams theta1;
  boxcox::BoxCoxParam lambda;
  Eigen::VectorXd y1;
};
ParamPoint random_point(const HierarchicalModel& model, Rng& rng, double lambda_lo = -1.0, double lambda_hi = 1.5);

}  // namespace fluxinv::fixtures
