#include "instance.hpp"

#include <cmath>
#include <string>

namespace fluxinv::fixtures {

Instance make_instance(Eigen::Index n1, Eigen::Index ns, Eigen::Index T, std::uint64_t seed,
                       const InstanceOptions& opt) {
  Rng rng = make_stream(seed, 0);
  SpatialGrid grid;
  grid.weights = Eigen::VectorXd::Ones(n1);
  grid.covariates = Eigen::MatrixXd::Zero(n1, 2);
  for (Eigen::Index i = 0; i < n1; ++i) {
    grid.cell_ids.push_back("c" + std::to_string(i + 1));
    const double lon = 4.0 * uniform01(rng);
    const double lat = 50.0 + 3.0 * uniform01(rng);
    grid.coords.push_back({lon, lat});
    grid.weights[i] = 0.5 + uniform01(rng);
  }
  // Guarantee both design columns are populated.
  for (Eigen::Index i = 0; i < n1; ++i) {
    const bool north = (i % 2 == 0);
    grid.coords[static_cast<std::size_t>(i)].lat += north ? 3.0 : 0.0;
    grid.covariates(i, north ? 0 : 1) = 1.0;
  }
  if (n1 < 2) grid.covariates = Eigen::MatrixXd::Ones(n1, 1);

  StationSet stations;
  for (Eigen::Index s = 0; s < ns; ++s) {
    stations.ids.push_back("s" + std::to_string(s + 1));
    stations.coords.push_back({4.0 * uniform01(rng), 51.0 + 4.0 * uniform01(rng)});
  }

  Eigen::VectorXd y1(n1);
  Eigen::VectorXd w1(n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    y1[i] = std::exp(2.5 + 0.6 * std_normal(rng));
    w1[i] = std::exp(2.5 + 0.6 * std_normal(rng));
  }

  osse::PlumeParams plume;
  plume.reference_flux = y1.mean();
  plume.target_signal = 40.0;
  SensitivityStack stack = osse::synth_sensitivities(grid, stations, T, rng, plume);

  osse::Missingness miss;
  miss.fraction = opt.missing_fraction;
  osse::SimulatedData data = osse::simulate(y1, stack, stations, opt.truth, opt.obs_variance, miss, rng);
  ObservationSet obs = opt.with_observations ? data.observations : ObservationSet{};
  HierarchicalModel model(grid, stations, stack, obs, w1, PriorBounds{}, opt.correlation);
  return Instance{std::move(model), y1, std::move(data)};
}

ParamPoint random_point(const HierarchicalModel& model, Rng& rng, double lambda_lo, double lambda_hi) {
  ParamPoint p;
  p.disc = {std::exp(-(1.0 + 5.0 * uniform01(rng))), -0.9 + 1.8 * uniform01(rng), std::exp(-1.5 + 2.5 * uniform01(rng))};
  p.theta1 = {0.1 + 1.8 * uniform01(rng), 0.2 + 1.6 * uniform01(rng)};
  p.lambda = {lambda_lo + (lambda_hi - lambda_lo) * uniform01(rng)};
  p.y1 = model.inventory();
  for (Eigen::Index i = 0; i < p.y1.size(); ++i) p.y1[i] *= std::exp(0.4 * std_normal(rng));
  return p;
}

}  // namespace fluxinv::fixtures
