#include "fluxinv/osse.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <unordered_map>

#include "fluxinv/errors.hpp"

namespace fluxinv::osse {

SpatialGrid regular_grid(const RegularGridSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1) throw ParameterError("regular grid needs nx, ny >= 1");
  if (!(spec.dlon > 0.0 && spec.dlat > 0.0)) throw ParameterError("regular grid spacing must be positive");
  SpatialGrid g;
  const Eigen::Index n = static_cast<Eigen::Index>(spec.nx) * spec.ny;
  g.weights = Eigen::VectorXd::Ones(n);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      g.cell_ids.push_back("c" + std::to_string(g.cell_ids.size() + 1));
      g.coords.push_back({spec.lon0 + i * spec.dlon, spec.lat0 + j * spec.dlat});
    }
  }
  bool split = false;
  if (spec.split_lat) {
    Eigen::Index above = 0;
    for (const auto& c : g.coords) above += c.lat > *spec.split_lat ? 1 : 0;
    split = above > 0 && above < n;
  }
  g.covariates = Eigen::MatrixXd::Ones(n, split ? 2 : 1);
  if (split) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const bool above = g.coords[static_cast<std::size_t>(k)].lat > *spec.split_lat;
      g.covariates(k, 0) = above ? 1.0 : 0.0;
      g.covariates(k, 1) = above ? 0.0 : 1.0;
    }
  }
  return g;
}

SensitivityStack synth_sensitivities(const SpatialGrid& grid, const StationSet& stations, Eigen::Index T, Rng& rng,
                                     const PlumeParams& plume) {
  if (T < 1) throw ParameterError("synth_sensitivities needs T >= 1");
  if (stations.size() < 1) throw ParameterError("synth_sensitivities needs at least one station");
  if (!(std::abs(plume.wind_ar) < 1.0)) throw ParameterError("wind AR coefficient must satisfy |rho| < 1");
  if (!(plume.along_sd > 0.0 && plume.cross_sd > 0.0 && plume.local_sd > 0.0)) {
    throw ParameterError("plume scales must be positive");
  }
  const Eigen::Index n1 = grid.size();
  const Eigen::Index ns = stations.size();
  SensitivityStack stack;
  stack.per_time.reserve(static_cast<std::size_t>(T));

  const double innov = std::sqrt(1.0 - plume.wind_ar * plume.wind_ar) * plume.wind_sd;
  double anomaly = plume.wind_sd * std_normal(rng);
  double total_row_sum = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) anomaly = plume.wind_ar * anomaly + innov * std_normal(rng);
    const double phi = plume.mean_direction + anomaly;
    const double ex = std::cos(phi);
    const double ey = std::sin(phi);
    Eigen::MatrixXd b(ns, n1);
    for (Eigen::Index s = 0; s < ns; ++s) {
      const Coord& st = stations.coords[static_cast<std::size_t>(s)];
      for (Eigen::Index u = 0; u < n1; ++u) {
        const Coord& c = grid.coords[static_cast<std::size_t>(u)];
        const double dx = c.lon - st.lon;
        const double dy = c.lat - st.lat;
        const double along = dx * ex + dy * ey;
        const double cross = -dx * ey + dy * ex;
        const double za = (along - plume.along_offset) / plume.along_sd;
        const double zc = cross / plume.cross_sd;
        const double r2 = (dx * dx + dy * dy) / (plume.local_sd * plume.local_sd);
        const double raw = std::exp(-0.5 * (za * za + zc * zc)) + plume.local_weight * std::exp(-0.5 * r2);
        b(s, u) = raw * grid.weights[u];
      }
    }
    total_row_sum += b.sum();
    stack.per_time.push_back(std::move(b));
  }

  double scale = plume.amplitude;
  if (plume.reference_flux > 0.0) {
    const double mean_row_sum = total_row_sum / static_cast<double>(T * ns);
    if (mean_row_sum > 0.0) scale *= plume.target_signal / (plume.reference_flux * mean_row_sum);
  }
  for (auto& b : stack.per_time) b *= scale;
  return stack;
}

SimulatedData simulate(const Eigen::VectorXd& y1_true, const SensitivityStack& stack, const StationSet& stations,
                       const DiscrepancyParams& disc, double obs_variance, const Missingness& missing, Rng& rng) {
  if ((y1_true.array() <= 0.0).any()) throw ParameterError("true flux must be positive");
  if (!(obs_variance > 0.0)) throw ParameterError("observation variance must be positive");
  if (y1_true.size() != stack.n_cells()) throw ParameterError("true flux length does not match sensitivities");
  if (stations.size() != stack.n_stations()) throw ParameterError("station count does not match sensitivities");
  const Eigen::Index T = stack.n_time();
  const Eigen::Index ns = stack.n_stations();

  SimulatedData out;
  out.y2 = covariance::simulate_discrepancy(disc, T, stations.coords, rng);
  for (Eigen::Index t = 0; t < T; ++t) {
    out.y2.row(t) += (stack.per_time[static_cast<std::size_t>(t)] * y1_true).transpose();
  }
  const double sd = std::sqrt(obs_variance);
  Eigen::MatrixXd z = out.y2;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < ns; ++s) z(t, s) += sd * std_normal(rng);
  }

  std::set<std::pair<Eigen::Index, Eigen::Index>> drop;
  if (missing.explicit_slots) {
    for (const auto& sl : missing.slots) {
      if (sl.first < 0 || sl.first >= T || sl.second < 0 || sl.second >= ns) {
        throw ParameterError("missing slot outside the (t, station) grid");
      }
      drop.insert(sl);
    }
  } else {
    if (!(missing.fraction >= 0.0 && missing.fraction < 1.0)) {
      throw ParameterError("missing fraction must lie in [0, 1)");
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index s = 0; s < ns; ++s) {
        if (uniform01(rng) < missing.fraction) drop.emplace(t, s);
      }
    }
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < ns; ++s) {
      if (drop.count({t, s}) != 0) {
        out.missing.emplace_back(t, s);
      } else {
        out.observations.readings.push_back({t, s, z(t, s), obs_variance});
      }
    }
  }
  return out;
}

ObservationSet simulate_observations(const Eigen::VectorXd& y1_true, const SensitivityStack& stack,
                                     const StationSet& stations, const DiscrepancyParams& disc, double obs_variance,
                                     const Missingness& missing, Rng& rng) {
  return simulate(y1_true, stack, stations, disc, obs_variance, missing, rng).observations;
}

Eigen::VectorXd scale_inventory(const Eigen::VectorXd& w, double target_mean, double target_variance) {
  if (w.size() < 2) throw ParameterError("scale_inventory needs at least two fluxes");
  if ((w.array() <= 0.0).any()) throw ParameterError("inventory fluxes must be positive");
  if (!(target_variance > 0.0)) throw ParameterError("target variance must be positive");
  const double n = static_cast<double>(w.size());
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / (n - 1.0);
  if (!(var > 0.0)) throw ParameterError("inventory has zero variance; cannot rescale");
  const double a = std::sqrt(target_variance / var);
  const double b = target_mean - a * mean;
  Eigen::VectorXd out = (a * w.array() + b).matrix();
  if ((out.array() <= 0.0).any()) {
    throw ParameterError("rescaled inventory has non-positive fluxes; choose a larger mean or smaller variance");
  }
  return out;
}

MolefractionConditional molefraction_conditional(const HierarchicalModel& model, const Eigen::VectorXd& y1,
                                                 const DiscrepancyParams& disc, bool dense_covariance) {
  const covariance::SeparablePrecision q = model.discrepancy_precision(disc);
  const covariance::ShiftedFactor factor(q, model.obs_precision());
  const Eigen::VectorXd by = model.stacked_sensitivities() * y1;
  MolefractionConditional out;
  out.mean = factor.solve(Eigen::VectorXd(model.obs_weighted_data() + q.apply(by)));
  if (dense_covariance) {
    out.covariance = factor.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(q.size(), q.size())));
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  }
  return out;
}

Eigen::MatrixXd posterior_molefraction(const samplers::PosteriorSamples& samples, const HierarchicalModel& model,
                                       const std::vector<Slot>& slots, Rng& rng, std::size_t stride) {
  if (samples.size() == 0) throw ParameterError("posterior_molefraction needs at least one sample");
  if (stride == 0) stride = 1;
  std::vector<Eigen::Index> idx;
  idx.reserve(slots.size());
  for (const auto& s : slots) {
    if (s.t < 0 || s.t >= model.n_time() || s.station < 0 || s.station >= model.n_stations()) {
      throw ParameterError("requested mole-fraction slot is outside the (t, station) grid");
    }
    idx.push_back(model.slot(s.t, s.station));
  }
  const std::size_t n_draws = (samples.size() + stride - 1) / stride;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_draws), static_cast<Eigen::Index>(slots.size()));
  const Eigen::MatrixXd& b = model.stacked_sensitivities();
  Eigen::VectorXd z(model.n_slots());
  for (std::size_t k = 0, row = 0; k < samples.size(); k += stride, ++row) {
    const covariance::SeparablePrecision q = model.discrepancy_precision(samples.disc[k]);
    const covariance::ShiftedFactor factor(q, model.obs_precision());
    const Eigen::VectorXd by = b * samples.flux.row(static_cast<Eigen::Index>(k)).transpose();
    const Eigen::VectorXd mean = factor.solve(Eigen::VectorXd(model.obs_weighted_data() + q.apply(by)));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = std_normal(rng);
    const Eigen::VectorXd draw = mean + factor.solve_upper(z);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = draw[idx[j]];
    }
  }
  return out;
}

double score_rmspe(const Eigen::VectorXd& truth, const Eigen::MatrixXd& predictions) {
  if (predictions.cols() != truth.size()) throw ParameterError("predictions and truth are not conformable");
  if (predictions.rows() < 1) throw ParameterError("need at least one prediction draw");
  const Eigen::VectorXd mean = predictions.colwise().mean().transpose();
  return std::sqrt((truth - mean).squaredNorm() / static_cast<double>(truth.size()));
}

double crps_sample(std::vector<double> draws, double outcome) {
  const std::size_t m = draws.size();
  if (m < 2) throw ParameterError("CRPS needs at least two draws");
  std::sort(draws.begin(), draws.end());
  double abs_err = 0.0;
  double spread = 0.0;
  // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - m - 1) x_(i) over sorted draws, i 1-based.
  for (std::size_t i = 0; i < m; ++i) {
    abs_err += std::abs(draws[i] - outcome);
    spread += (2.0 * static_cast<double>(i + 1) - static_cast<double>(m) - 1.0) * draws[i];
  }
  const double md = static_cast<double>(m);
  return abs_err / md - spread / (md * md);
}

double score_mcrps(const Eigen::VectorXd& truth, const Eigen::MatrixXd& predictions) {
  if (predictions.cols() != truth.size()) throw ParameterError("predictions and truth are not conformable");
  if (predictions.rows() < 2) throw ParameterError("MCRPS needs at least two draws per location");
  double total = 0.0;
  std::vector<double> col(static_cast<std::size_t>(predictions.rows()));
  for (Eigen::Index j = 0; j < predictions.cols(); ++j) {
    for (Eigen::Index i = 0; i < predictions.rows(); ++i) col[static_cast<std::size_t>(i)] = predictions(i, j);
    total += crps_sample(col, truth[j]);
  }
  return total / static_cast<double>(truth.size());
}

std::vector<Eigen::Index> resolve_mask(const RegionMask& mask, const SpatialGrid& grid) {
  std::unordered_map<std::string, Eigen::Index> lookup;
  for (Eigen::Index i = 0; i < grid.size(); ++i) lookup.emplace(grid.cell_ids[static_cast<std::size_t>(i)], i);
  std::vector<Eigen::Index> idx;
  idx.reserve(mask.cell_ids.size());
  for (const auto& id : mask.cell_ids) {
    const auto it = lookup.find(id);
    if (it == lookup.end()) throw ParameterError("mask '" + mask.name + "' references unknown cell '" + id + "'");
    idx.push_back(it->second);
  }
  return idx;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AggregateSummary aggregate_flux(const Eigen::MatrixXd& flux_draws, const RegionMask& mask, const SpatialGrid& grid,
                                FluxUnit unit) {
  if (flux_draws.cols() != grid.size()) throw ParameterError("flux draws do not match the grid");
  const auto idx = resolve_mask(mask, grid);
  const double factor = unit == FluxUnit::teragrams_per_year ? kGramsPerSecondToTgPerYear : 1.0;
  AggregateSummary out;
  out.totals = Eigen::VectorXd::Zero(flux_draws.rows());
  for (const auto j : idx) out.totals += flux_draws.col(j);
  out.totals *= factor;
  if (out.totals.size() > 0) {
    const std::vector<double> v(out.totals.data(), out.totals.data() + out.totals.size());
    out.median = quantile(v, 0.5);
    out.lower = quantile(v, 0.025);
    out.upper = quantile(v, 0.975);
  }
  return out;
}

AggregateSummary aggregate_flux(const samplers::PosteriorSamples& samples, const RegionMask& mask,
                                const SpatialGrid& grid, FluxUnit unit) {
  return aggregate_flux(samples.flux, mask, grid, unit);
}

BoxCoxFieldSimulator::BoxCoxFieldSimulator(const SpatialGrid& grid, const BoxCoxFieldSpec& spec)
    : lambda_{spec.lambda} {
  if (!(spec.tau1 > 0.0)) throw ParameterError("tau1 must be positive");
  if (spec.beta.size() != grid.n_covariates()) throw ParameterError("beta length does not match the covariates");
  mean_ = grid.covariates * spec.beta;
  sd_ = 1.0 / std::sqrt(spec.tau1);
  if (spec.correlation == FluxCorrelation::identity) {
    chol_ = Eigen::MatrixXd::Identity(grid.size(), grid.size());
  } else {
    const auto llt = covariance::robust_llt(covariance::powered_exp_corr(spec.theta1, grid.coords),
                                            "flux correlation R(theta1)");
    chol_ = llt.matrixL();
  }
}

Eigen::VectorXd BoxCoxFieldSimulator::draw_transformed(Rng& rng) const {
  Eigen::VectorXd z(mean_.size());
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = std_normal(rng);
    Eigen::VectorXd g = mean_ + sd_ * (chol_ * z);
    if (boxcox::truncation_ok(g, lambda_)) return g;
  }
  throw ParameterError("Box-Cox field draw violated the truncation region " + std::to_string(kMaxAttempts) +
                       " times; the parameters put substantial mass outside the transform's image");
}

Eigen::VectorXd BoxCoxFieldSimulator::draw(Rng& rng) const { return boxcox::inverse(draw_transformed(rng), lambda_); }

Eigen::VectorXd simulate_boxcox_field(const SpatialGrid& grid, const BoxCoxFieldSpec& spec, Rng& rng) {
  return BoxCoxFieldSimulator(grid, spec).draw(rng);
}

void OsseConfig::validate() const {
  covariance::validate(disc);
  if (!(obs_variance > 0.0)) throw ParameterError("observation variance must be positive");
  if (variant < 1 || variant > 6) throw ParameterError("model variant must be in 1..6");
  if (!missing.explicit_slots && !(missing.fraction >= 0.0 && missing.fraction < 1.0)) {
    throw ParameterError("missing fraction must lie in [0, 1)");
  }
  if (const auto* spec = std::get_if<BoxCoxFieldSpec>(&truth)) {
    if (!(spec->tau1 > 0.0)) throw ParameterError("tau1 must be positive");
    covariance::validate(spec->theta1);
  }
}

Scores score_posterior(const samplers::PosteriorSamples& samples, const HierarchicalModel& model,
                       const Eigen::VectorXd& flux_truth, const std::vector<Slot>& mf_slots,
                       const Eigen::VectorXd& mf_truth, Rng& rng, std::size_t mf_stride) {
  Scores s;
  s.flux_rmspe = score_rmspe(flux_truth, samples.flux);
  s.flux_mcrps = score_mcrps(flux_truth, samples.flux);
  if (!mf_slots.empty()) {
    const Eigen::MatrixXd mf = posterior_molefraction(samples, model, mf_slots, rng, mf_stride);
    s.mf_rmspe = score_rmspe(mf_truth, mf);
    s.mf_mcrps = mf.rows() >= 2 ? score_mcrps(mf_truth, mf) : 0.0;
  }
  return s;
}

}  // namespace fluxinv::osse
