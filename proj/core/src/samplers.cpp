#include "fluxinv/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "fluxinv/errors.hpp"

namespace fluxinv::samplers {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double open_uniform(Rng& rng) {
  double u = 0.0;
  while (u <= 0.0) u = uniform01(rng);
  return u;
}

double draw_in(const Interval& iv, Rng& rng) { return iv.lo + iv.width() * open_uniform(rng); }

double kinetic(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_mass) {
  if (inv_mass.size() == 0) return 0.5 * p.squaredNorm();
  return 0.5 * (p.array().square() * inv_mass.array()).sum();
}

double evaluate(const ValueAndGradient& target, const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
  const double v = target(x, &grad);
  if (std::isfinite(v) && !grad.allFinite()) {
    throw SamplerError("non-finite gradient at a point with finite log-density");
  }
  return v;
}

}  // namespace

Eigen::VectorXd slice_sample_block(const LogDensity& log_density, const Eigen::VectorXd& current,
                                   const Eigen::VectorXd& widths, Rng& rng, const SliceConfig& cfg) {
  if (widths.size() != current.size()) throw SamplerError("slice widths do not match the block size");
  Eigen::VectorXd x = current;
  double fx = log_density(x);
  if (!std::isfinite(fx)) throw SamplerError("slice sampler started at a point with non-finite log-density");

  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double w = widths[i];
    if (!(w > 0.0)) throw SamplerError("slice widths must be positive");
    const double x0 = x[i];
    const double level = fx - std::exponential_distribution<double>(1.0)(rng);
    auto f_at = [&](double v) {
      Eigen::VectorXd y = x;
      y[i] = v;
      return log_density(y);
    };

    double lo = x0 - w * uniform01(rng);
    double hi = lo + w;
    int j = static_cast<int>(std::floor(cfg.max_steps_out * uniform01(rng)));
    int k = cfg.max_steps_out - 1 - j;
    while (j-- > 0 && f_at(lo) > level) lo -= w;
    while (k-- > 0 && f_at(hi) > level) hi += w;

    bool accepted = false;
    for (int s = 0; s < cfg.max_shrinks; ++s) {
      const double cand = lo + (hi - lo) * uniform01(rng);
      const double fc = f_at(cand);
      if (fc > level) {
        x[i] = cand;
        fx = fc;
        accepted = true;
        break;
      }
      if (cand < x0) {
        lo = cand;
      } else {
        hi = cand;
      }
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "slice sampler failed to find a point above the slice for coordinate " << i << " (x0=" << x0
          << ", level=" << level << ", interval=[" << lo << ", " << hi << "])";
      throw SamplerError(msg.str());
    }
    if (!(fx >= level)) throw SamplerError("slice sampler accepted a point below the slice level");
  }
  return x;
}

void HmcConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw SamplerError("HMC step size must be positive");
  if (leapfrog_min < 1 || leapfrog_max < leapfrog_min) throw SamplerError("HMC leapfrog range must be 1 <= min <= max");
  if (adapt_window < 0) throw SamplerError("HMC adaptation window must be non-negative");
  if (!(accept_lo > 0.0 && accept_lo < accept_hi && accept_hi < 1.0)) {
    throw SamplerError("HMC acceptance band must satisfy 0 < lo < hi < 1");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw SamplerError("HMC target acceptance must lie in (0, 1)");
  if (inv_mass.size() > 0 && !(inv_mass.array() > 0.0).all()) throw SamplerError("inverse mass must be positive");
}

Trajectory leapfrog(const ValueAndGradient& target, const Eigen::VectorXd& x0, const Eigen::VectorXd& p0,
                    double step_size, int n_steps, const Eigen::VectorXd& inv_mass) {
  Trajectory tr{x0, p0, 0.0, true};
  Eigen::VectorXd grad;
  double v = evaluate(target, tr.position, grad);
  if (!std::isfinite(v)) {
    tr.finite = false;
    tr.log_density = v;
    return tr;
  }
  tr.momentum += 0.5 * step_size * grad;
  for (int l = 0; l < n_steps; ++l) {
    if (inv_mass.size() == 0) {
      tr.position += step_size * tr.momentum;
    } else {
      tr.position.array() += step_size * inv_mass.array() * tr.momentum.array();
    }
    v = evaluate(target, tr.position, grad);
    if (!std::isfinite(v)) {
      tr.finite = false;
      tr.log_density = v;
      return tr;
    }
    tr.momentum += (l + 1 < n_steps ? 1.0 : 0.5) * step_size * grad;
  }
  tr.log_density = v;
  return tr;
}

HmcResult hmc_step(const ValueAndGradient& target, const Eigen::VectorXd& current, const HmcConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.inv_mass.size() != 0 && cfg.inv_mass.size() != current.size()) {
    throw SamplerError("inverse mass does not match the state size");
  }
  Eigen::VectorXd grad;
  const double v0 = evaluate(target, current, grad);
  if (!std::isfinite(v0)) throw SamplerError("HMC started at a point with non-finite log-density");

  Eigen::VectorXd p0(current.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    const double z = std_normal(rng);
    p0[i] = cfg.inv_mass.size() == 0 ? z : z / std::sqrt(cfg.inv_mass[i]);
  }
  const int n_steps = std::uniform_int_distribution<int>(cfg.leapfrog_min, cfg.leapfrog_max)(rng);
  const Trajectory tr = leapfrog(target, current, p0, cfg.step_size, n_steps, cfg.inv_mass);

  HmcResult out{false, current, v0, 0.0};
  // Draw the uniform unconditionally so the stream does not depend on the path.
  const double u = uniform01(rng);
  if (!tr.finite) return out;
  const double log_ratio = (tr.log_density - kinetic(tr.momentum, cfg.inv_mass)) - (v0 - kinetic(p0, cfg.inv_mass));
  out.accept_prob = std::isnan(log_ratio) ? 0.0 : std::min(1.0, std::exp(log_ratio));
  if (u < out.accept_prob) {
    out.accepted = true;
    out.state = tr.position;
    out.log_density = tr.log_density;
  }
  return out;
}

HmcResult hmc_step(const LogDensity& log_density, const Gradient& grad, const Eigen::VectorXd& current,
                   const HmcConfig& cfg, Rng& rng) {
  const ValueAndGradient fused = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double v = log_density(x);
    if (g != nullptr && std::isfinite(v)) *g = grad(x);
    return v;
  };
  return hmc_step(fused, current, cfg, rng);
}

double adapt_step_size(const HmcConfig& cfg, double accept_rate, long iteration) {
  if (iteration < 1 || iteration > cfg.adapt_window) return cfg.step_size;
  const double eta = 0.5 * std::pow(static_cast<double>(iteration), -0.6);
  return std::exp(std::log(cfg.step_size) + eta * (accept_rate - cfg.target_accept));
}

double find_reasonable_step_size(const ValueAndGradient& target, const Eigen::VectorXd& x, double initial,
                                 Rng& rng, const Eigen::VectorXd& inv_mass) {
  Eigen::VectorXd grad;
  const double v0 = evaluate(target, x, grad);
  if (!std::isfinite(v0)) throw SamplerError("step-size search started outside the support");
  Eigen::VectorXd p0(x.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    const double z = std_normal(rng);
    p0[i] = inv_mass.size() == 0 ? z : z / std::sqrt(inv_mass[i]);
  }
  const double h0 = v0 - kinetic(p0, inv_mass);
  auto log_accept = [&](double eps) {
    const Trajectory tr = leapfrog(target, x, p0, eps, 1, inv_mass);
    if (!tr.finite) return kNegInf;
    const double r = tr.log_density - kinetic(tr.momentum, inv_mass) - h0;
    return std::isnan(r) ? kNegInf : r;
  };
  double eps = initial;
  const double half = std::log(0.5);
  const bool grow = log_accept(eps) > half;
  for (int k = 0; k < 100; ++k) {
    const double next = grow ? 2.0 * eps : 0.5 * eps;
    const double la = log_accept(next);
    if (grow ? !(la > half) : la > half) return grow ? eps : next;
    eps = next;
  }
  return eps;
}

void GibbsConfig::validate() const {
  if (n_chains < 1) throw SamplerError("need at least one chain");
  if (thin < 1) throw SamplerError("thinning interval must be >= 1");
  if (burn_in < 0) throw SamplerError("burn-in must be non-negative");
  if (n_iter <= burn_in) throw SamplerError("n_iter must exceed burn_in; no draws would be retained");
  if (PosteriorSamples::retained_per_chain(n_iter, burn_in, thin) < 1) {
    throw SamplerError("thinning leaves no retained draws");
  }
  hmc.validate();
}

Variant variant(int id) {
  Variant v;
  v.id = id;
  switch (id) {
    case 1: break;
    case 2: v.fixed_lambda = 0.0; break;
    case 3: v.fixed_lambda = 1.0; break;
    case 4: v.correlation = FluxCorrelation::identity; break;
    case 5: v.fixed_lambda = 0.0; v.correlation = FluxCorrelation::identity; break;
    case 6: v.fixed_lambda = 1.0; v.correlation = FluxCorrelation::identity; break;
    default: throw ParameterError("model variant must be in 1..6, got " + std::to_string(id));
  }
  return v;
}

long PosteriorSamples::retained_per_chain(long n_iter, long burn_in, long thin) {
  if (thin < 1 || n_iter <= burn_in) return 0;
  return (n_iter - burn_in) / thin;
}

double PosteriorSamples::acceptance_rate(int chain_index, long from_iteration) const {
  const auto& acc = hmc_accepted.at(static_cast<std::size_t>(chain_index));
  long n = 0;
  long hits = 0;
  for (std::size_t i = static_cast<std::size_t>(std::max(0L, from_iteration)); i < acc.size(); ++i, ++n) hits += acc[i];
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

ChainState initialize_chain(const HierarchicalModel& model, Rng& rng, std::optional<double> fixed_lambda) {
  const auto& b = model.bounds();
  ChainState s;
  s.disc = from_sampling_coords({draw_in(b.log_inv_tau2, rng), draw_in(b.a, rng), draw_in(b.log_d, rng)});
  s.theta1 = {draw_in(b.theta11, rng), draw_in(b.theta12, rng)};
  const double lam = draw_in(b.lambda, rng);
  s.lambda = {fixed_lambda.value_or(lam)};
  s.y1 = model.inventory();
  for (Eigen::Index i = 0; i < s.y1.size(); ++i) s.y1[i] *= std::exp(0.1 * std_normal(rng));
  return s;
}

int resolve_threads(int requested, int n_chains) {
  int t = requested;
  if (t <= 0) {
    if (const char* env = std::getenv("FLUXINV_THREADS"); env != nullptr && *env != '\0') {
      t = std::atoi(env);
    }
  }
  if (t <= 0) t = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  return std::max(1, std::min(t, n_chains));
}

namespace {

struct ChainOutput {
  std::vector<long> iteration;
  std::vector<Eigen::VectorXd> flux;
  std::vector<DiscrepancyParams> disc;
  std::vector<FluxCorrParams> theta1;
  std::vector<double> lambda;
  std::vector<std::uint8_t> accepted;
  double final_step = 0.0;
};

class FluxParamBlock {
 public:
  FluxParamBlock(const HierarchicalModel& model, bool theta_free, bool lambda_free)
      : model_(model), theta_free_(theta_free), lambda_free_(lambda_free) {}

  Eigen::Index size() const { return (theta_free_ ? 2 : 0) + (lambda_free_ ? 1 : 0); }

  Eigen::VectorXd pack(const ChainState& s) const {
    Eigen::VectorXd v(size());
    Eigen::Index k = 0;
    if (theta_free_) {
      v[k++] = s.theta1.theta11;
      v[k++] = s.theta1.theta12;
    }
    if (lambda_free_) v[k++] = s.lambda.lambda;
    return v;
  }

  void unpack(const Eigen::VectorXd& v, ChainState& s) const {
    Eigen::Index k = 0;
    if (theta_free_) {
      s.theta1.theta11 = v[k++];
      s.theta1.theta12 = v[k++];
    }
    if (lambda_free_) s.lambda.lambda = v[k++];
  }

  Eigen::VectorXd widths() const {
    const auto& b = model_.bounds();
    Eigen::VectorXd w(size());
    Eigen::Index k = 0;
    if (theta_free_) {
      w[k++] = b.theta11.width() / 10.0;
      w[k++] = b.theta12.width() / 10.0;
    }
    if (lambda_free_) w[k++] = b.lambda.width() / 10.0;
    return w;
  }

  const FluxFieldPrior& prior(const FluxCorrParams& theta1) {
    if (!cached_ || cached_theta_.theta11 != theta1.theta11 || cached_theta_.theta12 != theta1.theta12) {
      cached_.emplace(model_, theta1);
      cached_theta_ = theta1;
    }
    return *cached_;
  }

  double log_density(const ChainState& s) {
    const auto& b = model_.bounds();
    if (lambda_free_ && !b.lambda.contains(s.lambda.lambda)) return kNegInf;
    if (theta_free_ && !b.contains(s.theta1)) return kNegInf;
    return log_cond_fluxparams(prior(s.theta1), s.lambda, s.y1, model_.inventory());
  }

 private:
  const HierarchicalModel& model_;
  bool theta_free_;
  bool lambda_free_;
  std::optional<FluxFieldPrior> cached_;
  FluxCorrParams cached_theta_;
};

ChainOutput run_chain(const HierarchicalModel& model, const GibbsConfig& cfg, int chain_index,
                      std::mutex& log_mutex) {
  Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(chain_index));
  ChainState s = initialize_chain(model, rng, cfg.fixed_lambda);
  s.stream = static_cast<std::uint64_t>(chain_index);

  HmcConfig hmc = cfg.hmc;
  const long window = std::min<long>(hmc.adapt_window, cfg.burn_in);
  hmc.adapt_window = static_cast<int>(window);
  s.step_size = hmc.step_size;

  const bool theta_free = model.flux_correlation() == FluxCorrelation::powered_exponential;
  FluxParamBlock flux_params(model, theta_free, !cfg.fixed_lambda.has_value());
  const auto& b = model.bounds();
  const Eigen::Vector3d disc_widths(b.log_inv_tau2.width() / 10.0, b.a.width() / 10.0, b.log_d.width() / 10.0);

  // Mass adaptation: collect Y1 moments over the second quarter of the window.
  const long mass_from = window / 4;
  const long mass_at = window / 2;
  const bool adapt_mass = cfg.adapt_mass && mass_at > mass_from + 10;
  Eigen::VectorXd m_mean = Eigen::VectorXd::Zero(model.n_cells());
  Eigen::VectorXd m_m2 = Eigen::VectorXd::Zero(model.n_cells());
  long m_count = 0;
  long rm_offset = 0;

  ChainOutput out;
  const long keep = PosteriorSamples::retained_per_chain(cfg.n_iter, cfg.burn_in, cfg.thin);
  out.iteration.reserve(static_cast<std::size_t>(keep));
  out.accepted.reserve(static_cast<std::size_t>(cfg.n_iter));

  bool step_initialised = !cfg.auto_initial_step;
  for (long it = 1; it <= cfg.n_iter; ++it) {
    s.iteration = it;
    try {
      {
        const DiscrepancyConditional target(model, s.y1);
        const Eigen::VectorXd c = slice_sample_block(
            [&](const Eigen::VectorXd& v) { return target(from_sampling_coords(Eigen::Vector3d(v))); },
            to_sampling_coords(s.disc), disc_widths, rng);
        s.disc = from_sampling_coords(Eigen::Vector3d(c));
      }
      {
        const FluxLikelihood lik(model, s.disc);
        const FluxConditional target(model, lik, flux_params.prior(s.theta1), s.lambda);
        const ValueAndGradient vg = [&](const Eigen::VectorXd& y, Eigen::VectorXd* g) { return target.value(y, g); };
        if (!step_initialised) {
          s.step_size = find_reasonable_step_size(vg, s.y1, hmc.step_size, rng, hmc.inv_mass);
          step_initialised = true;
        }
        hmc.step_size = s.step_size;
        const HmcResult r = hmc_step(vg, s.y1, hmc, rng);
        if (r.accepted) s.y1 = r.state;
        out.accepted.push_back(r.accepted ? 1 : 0);
        if (it <= window) s.step_size = adapt_step_size(hmc, r.accept_prob, it - rm_offset);
      }
      if (flux_params.size() > 0) {
        const Eigen::VectorXd v = slice_sample_block(
            [&](const Eigen::VectorXd& x) {
              ChainState trial = s;
              flux_params.unpack(x, trial);
              return flux_params.log_density(trial);
            },
            flux_params.pack(s), flux_params.widths(), rng);
        flux_params.unpack(v, s);
      }
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "chain " << chain_index << ", iteration " << it << ": " << e.what();
      throw SamplerError(msg.str());
    }

    if (adapt_mass && it > mass_from && it <= mass_at) {
      ++m_count;
      const Eigen::VectorXd delta = s.y1 - m_mean;
      m_mean += delta / static_cast<double>(m_count);
      m_m2.array() += delta.array() * (s.y1 - m_mean).array();
      if (it == mass_at) {
        const double n = static_cast<double>(m_count);
        Eigen::VectorXd var = m_m2 / (n - 1.0);
        // Shrink toward a common scale so poorly sampled cells stay sane.
        const double scale = var.mean();
        var = (n / (n + 5.0)) * var.array() + 1e-3 * scale * (5.0 / (n + 5.0));
        hmc.inv_mass = var;
        const FluxLikelihood lik(model, s.disc);
        const FluxConditional target(model, lik, flux_params.prior(s.theta1), s.lambda);
        const ValueAndGradient vg = [&](const Eigen::VectorXd& y, Eigen::VectorXd* g) { return target.value(y, g); };
        s.step_size = find_reasonable_step_size(vg, s.y1, s.step_size, rng, hmc.inv_mass);
        rm_offset = it;
      }
    }

    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.iteration.push_back(it);
      out.flux.push_back(s.y1);
      out.disc.push_back(s.disc);
      out.theta1.push_back(s.theta1);
      out.lambda.push_back(s.lambda.lambda);
    }
    if (cfg.progress && (it % std::max(1L, cfg.n_iter / 10) == 0 || it == cfg.n_iter)) {
      long hits = 0;
      for (auto a : out.accepted) hits += a;
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << "chain " << chain_index << " iter " << it << "/" << cfg.n_iter << " hmc_accept="
                << static_cast<double>(hits) / static_cast<double>(out.accepted.size()) << " step=" << s.step_size
                << " lambda=" << s.lambda.lambda << "\n";
    }
  }
  out.final_step = s.step_size;
  return out;
}

}  // namespace

PosteriorSamples run_gibbs(const HierarchicalModel& model, const GibbsConfig& cfg) {
  cfg.validate();
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(cfg.n_chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.n_chains));
  std::atomic<int> next{0};
  std::mutex log_mutex;

  auto worker = [&]() {
    for (int c = next++; c < cfg.n_chains; c = next++) {
      try {
        outputs[static_cast<std::size_t>(c)] = run_chain(model, cfg, c, log_mutex);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  const int n_threads = resolve_threads(cfg.threads, cfg.n_chains);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PosteriorSamples ps;
  ps.n_cells = model.n_cells();
  ps.n_chains = cfg.n_chains;
  ps.lambda_fixed = cfg.fixed_lambda.has_value();
  ps.theta1_fixed = model.flux_correlation() == FluxCorrelation::identity;
  std::size_t total = 0;
  for (const auto& o : outputs) total += o.iteration.size();
  ps.flux.resize(static_cast<Eigen::Index>(total), model.n_cells());
  Eigen::Index row = 0;
  for (int c = 0; c < cfg.n_chains; ++c) {
    auto& o = outputs[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < o.iteration.size(); ++k, ++row) {
      ps.chain.push_back(c);
      ps.iteration.push_back(o.iteration[k]);
      ps.flux.row(row) = o.flux[k].transpose();
      ps.disc.push_back(o.disc[k]);
      ps.theta1.push_back(o.theta1[k]);
      ps.lambda.push_back(o.lambda[k]);
    }
    ps.hmc_accepted.push_back(std::move(o.accepted));
    ps.final_step_size.push_back(o.final_step);
  }
  return ps;
}

PosteriorSamples run_gibbs(const HierarchicalModel& model, int n_chains, long n_iter, long burn_in, long thin,
                           std::uint64_t seed) {
  GibbsConfig cfg;
  cfg.n_chains = n_chains;
  cfg.n_iter = n_iter;
  cfg.burn_in = burn_in;
  cfg.thin = thin;
  cfg.seed = seed;
  return run_gibbs(model, cfg);
}

}  // namespace fluxinv::samplers
