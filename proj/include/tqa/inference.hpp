#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tqa/distributions.hpp"
#include "tqa/errors.hpp"
#include "tqa/rng.hpp"
#include "tqa/stats.hpp"

namespace tqa {

// Log target over an unconstrained parameter vector. report() maps an
// unconstrained point to the values stored in the ChainSet; models use it
// to record natural-space parameters.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::size_t dim() const = 0;
  virtual double log_density(std::span<const double> u) const = 0;

  // Gradient support is optional; the Hamiltonian kernel requires it.
  virtual bool has_gradient() const { return false; }
  // Returns the log density and fills grad with its gradient.
  virtual double log_density_gradient(std::span<const double> /*u*/,
                                      std::span<double> /*grad*/) const {
    throw InvalidInput("this target does not implement a gradient");
  }

  virtual void report(std::span<const double> u, std::span<double> out) const {
    std::copy(u.begin(), u.end(), out.begin());
  }

  virtual std::vector<std::string> parameter_names() const {
    std::vector<std::string> names(dim());
    for (std::size_t i = 0; i < names.size(); ++i)
      names[i] = "p" + std::to_string(i);
    return names;
  }

  virtual std::vector<double> initial_point() const {
    return std::vector<double>(dim(), 0.0);
  }
};

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_samples = 1000;  // stored draws per chain
  int thin = 1;          // iterations per stored draw (1 = store everything)
  std::uint64_t seed = 1;
  double target_acceptance = 0.234;
  double init_jitter = 0.1;  // half-width of the uniform jitter on the start point
  // "adaptive_rwm": per-coordinate proposal scales (cheap, any dimension).
  // "adaptive_rwm_full": full proposal covariance learned during warmup;
  // helps correlated targets but needs a well-mixing warmup to estimate.
  // "ensemble_stretch": affine-invariant ensemble with stretch moves;
  // parameter-free and robust to correlation, gradient-free.
  // "hmc": Hamiltonian kernel with dual-averaged step size and a diagonal
  // mass matrix adapted during warmup; requires the target's gradient and
  // mixes orders of magnitude faster on weakly identified directions.
  std::string algorithm = "adaptive_rwm";
  double stretch_a = 2.0;   // stretch-move scale for the ensemble sampler
  int hmc_leapfrog = 32;    // max leapfrog steps; actual count is jittered
  int max_threads = 0;  // 0 = hardware concurrency

  // convergence gate thresholds
  double gate_max_rhat = 1.05;
  double gate_min_ess = 200.0;

  void validate() const {
    if (n_chains < 1 || n_warmup < 1 || n_samples < 1 || thin < 1)
      throw InvalidInput("sampler config: counts must be >= 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
      throw InvalidInput("sampler config: target_acceptance must be in (0,1)");
    if (algorithm != "adaptive_rwm" && algorithm != "adaptive_rwm_full" &&
        algorithm != "ensemble_stretch" && algorithm != "hmc")
      throw InvalidInput("sampler config: unknown algorithm '" + algorithm + "'");
    if (!(stretch_a > 1.0))
      throw InvalidInput("sampler config: stretch_a must be > 1");
    if (hmc_leapfrog < 1)
      throw InvalidInput("sampler config: hmc_leapfrog must be >= 1");
  }
};

// Post-warmup draws of every chain, stored in reported (natural) space.
struct ChainSet {
  std::size_t n_chains = 0;
  std::size_t n_draws = 0;  // per chain
  std::size_t n_params = 0;
  std::vector<std::string> parameter_names;
  std::vector<double> draws;  // [chain][draw][param], row-major
  std::vector<double> acceptance_rates;  // per chain, post-warmup
  SamplerConfig config;
  double elapsed_seconds = 0.0;

  double value(std::size_t chain, std::size_t draw, std::size_t param) const {
    return draws[(chain * n_draws + draw) * n_params + param];
  }

  std::span<const double> draw_row(std::size_t chain, std::size_t draw) const {
    return {draws.data() + (chain * n_draws + draw) * n_params, n_params};
  }

  std::size_t total_draws() const { return n_chains * n_draws; }

  std::span<const double> flat_draw(std::size_t i) const {
    return {draws.data() + i * n_params, n_params};
  }

  std::vector<std::vector<double>> chains_for(std::size_t param) const {
    std::vector<std::vector<double>> out(n_chains, std::vector<double>(n_draws));
    for (std::size_t c = 0; c < n_chains; ++c)
      for (std::size_t i = 0; i < n_draws; ++i) out[c][i] = value(c, i, param);
    return out;
  }

  std::vector<double> pooled(std::size_t param) const {
    std::vector<double> out;
    out.reserve(total_draws());
    for (std::size_t c = 0; c < n_chains; ++c)
      for (std::size_t i = 0; i < n_draws; ++i) out.push_back(value(c, i, param));
    return out;
  }

  std::size_t param_index(std::string_view name) const {
    for (std::size_t p = 0; p < parameter_names.size(); ++p)
      if (parameter_names[p] == name) return p;
    throw InvalidInput("unknown parameter '" + std::string(name) + "'");
  }

  bool has_param(std::string_view name) const {
    for (const auto& n : parameter_names)
      if (n == name) return true;
    return false;
  }

  std::vector<double> posterior_mean() const {
    std::vector<double> m(n_params, 0.0);
    for (std::size_t i = 0; i < total_draws(); ++i) {
      const auto row = flat_draw(i);
      for (std::size_t p = 0; p < n_params; ++p) m[p] += row[p];
    }
    for (auto& v : m) v /= static_cast<double>(total_draws());
    return m;
  }
};

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1 : -1);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

// Biased autocovariance (normalised by n) of a demeaned copy of x.
inline std::vector<double> autocovariance_biased(std::span<const double> x) {
  const std::size_t n = x.size();
  const double m = mean(x);
  std::size_t npad = 1;
  while (npad < 2 * n) npad <<= 1;
  std::vector<std::complex<double>> a(npad, {0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) a[i] = {x[i] - m, 0.0};
  fft_radix2(a, false);
  for (auto& v : a) v = {std::norm(v), 0.0};
  fft_radix2(a, true);
  std::vector<double> c(n);
  for (std::size_t t = 0; t < n; ++t) c[t] = a[t].real() / static_cast<double>(n);
  return c;
}

// Split every chain into halves of equal length.
inline std::vector<std::vector<double>> split_chains(
    const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2)
    throw InvalidInput("diagnostics need at least 2 chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw InvalidInput("diagnostics need at least 4 draws per chain");
  const std::size_t half = n / 2;
  std::vector<std::vector<double>> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  return out;
}

struct VarianceParts {
  double w = 0.0;        // mean within-sequence variance
  double var_means = 0.0;  // variance of sequence means (= B/N)
  double var_plus = 0.0;
  std::size_t len = 0;
};

inline VarianceParts variance_parts(const std::vector<std::vector<double>>& seqs) {
  const std::size_t len = seqs.front().size();
  std::vector<double> means, vars;
  means.reserve(seqs.size());
  vars.reserve(seqs.size());
  for (const auto& s : seqs) {
    means.push_back(mean(s));
    vars.push_back(sample_variance(s));
  }
  VarianceParts p;
  p.len = len;
  p.w = mean(vars);
  p.var_means = sample_variance(means);
  p.var_plus =
      (static_cast<double>(len - 1) / static_cast<double>(len)) * p.w + p.var_means;
  if (!(p.w > 0.0))
    throw InsufficientData("diagnostic undefined: zero within-chain variance");
  return p;
}

}  // namespace detail

// Split-chain potential scale reduction factor.
inline double r_hat(const std::vector<std::vector<double>>& chains) {
  const auto seqs = detail::split_chains(chains);
  const auto p = detail::variance_parts(seqs);
  return std::sqrt(p.var_plus / p.w);
}

// Effective sample size from split-chain autocorrelations with Geyer
// initial-monotone truncation.
inline double ess(const std::vector<std::vector<double>>& chains) {
  const auto seqs = detail::split_chains(chains);
  const auto p = detail::variance_parts(seqs);
  const std::size_t m = seqs.size();
  const std::size_t n = p.len;

  std::vector<std::vector<double>> autocov;
  autocov.reserve(m);
  for (const auto& s : seqs) autocov.push_back(detail::autocovariance_biased(s));

  std::vector<double> rho(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double c = 0.0;
    for (std::size_t k = 0; k < m; ++k) c += autocov[k][t];
    c /= static_cast<double>(m);
    rho[t] = 1.0 - (p.w - c) / p.var_plus;
  }

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho[2 * k] + rho[2 * k + 1];
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decay
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::numeric_limits<double>::max());
  const double total = static_cast<double>(m * n);
  return std::min(total / tau, total);
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  double rhat = 0.0;
  double ess = 0.0;
  bool degenerate = false;  // zero-variance draws; rhat/ess undefined
};

inline std::vector<ParameterSummary> summarize(const ChainSet& cs) {
  std::vector<ParameterSummary> out;
  out.reserve(cs.n_params);
  for (std::size_t p = 0; p < cs.n_params; ++p) {
    ParameterSummary s;
    s.name = cs.parameter_names[p];
    auto pooled = cs.pooled(p);
    s.mean = mean(pooled);
    s.sd = pooled.size() > 1 ? sample_sd(pooled) : 0.0;
    std::sort(pooled.begin(), pooled.end());
    s.q025 = quantile_sorted(pooled, 0.025);
    s.median = quantile_sorted(pooled, 0.5);
    s.q975 = quantile_sorted(pooled, 0.975);
    try {
      const auto per_chain = cs.chains_for(p);
      s.rhat = r_hat(per_chain);
      s.ess = ess(per_chain);
    } catch (const InvalidInput&) {
      s.degenerate = true;
      s.rhat = std::numeric_limits<double>::quiet_NaN();
      s.ess = 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct GateResult {
  bool accepted = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  std::string worst_rhat_param;
  std::string worst_ess_param;
};

inline GateResult check_convergence(const std::vector<ParameterSummary>& summaries,
                                    const SamplerConfig& config) {
  GateResult g;
  g.max_rhat = 0.0;
  g.min_ess = std::numeric_limits<double>::infinity();
  bool any_degenerate = false;
  for (const auto& s : summaries) {
    if (s.degenerate) {
      any_degenerate = true;
      continue;
    }
    if (s.rhat > g.max_rhat) {
      g.max_rhat = s.rhat;
      g.worst_rhat_param = s.name;
    }
    if (s.ess < g.min_ess) {
      g.min_ess = s.ess;
      g.worst_ess_param = s.name;
    }
  }
  g.accepted = !any_degenerate && !summaries.empty() &&
               g.max_rhat <= config.gate_max_rhat && g.min_ess >= config.gate_min_ess;
  return g;
}

namespace detail {

// In-place lower Cholesky factor of a row-major symmetric matrix.
inline bool cholesky_lower(std::vector<double>& a, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * d + k] * a[j * d + k];
      if (i == j) {
        if (!(sum > 0.0)) return false;
        a[i * d + i] = std::sqrt(sum);
      } else {
        a[i * d + j] = sum / a[j * d + j];
      }
    }
    for (std::size_t j = i + 1; j < d; ++j) a[i * d + j] = 0.0;
  }
  return true;
}

// One adaptive random-walk Metropolis chain. Proposal scales are
// per-coordinate Welford estimates of the marginal sd (or, for the full
// variant, a Cholesky factor of the running sample covariance) times a
// global factor tuned to the target acceptance rate by Robbins-Monro on
// log scale. Adaptation is frozen when warmup ends.
class RwmChain {
 public:
  RwmChain(const TargetDensity& target, const SamplerConfig& cfg, Rng rng)
      : target_(target), cfg_(cfg), rng_(rng), d_(target.dim()),
        full_cov_(cfg.algorithm == "adaptive_rwm_full") {
    x_ = target_.initial_point();
    if (x_.size() != d_)
      throw InvalidInput("initial point dimension mismatch");
    for (auto& v : x_)
      v += rng_.uniform(-cfg_.init_jitter, cfg_.init_jitter);
    lp_ = target_.log_density(x_);
    if (!std::isfinite(lp_))
      throw SamplingError("non-finite log density at the initial point");
    log_lambda_ = std::log(2.38 / std::sqrt(static_cast<double>(d_)));
    scale_.assign(d_, 1.0);
    welford_mean_.assign(d_, 0.0);
    welford_m2_.assign(d_, 0.0);
    if (full_cov_) cov_m2_.assign(d_ * d_, 0.0);
    y_.resize(d_);
    z_.resize(d_);
  }

  void run(std::span<double> out_draws, double& acceptance_rate) {
    warmup();
    const std::size_t total = static_cast<std::size_t>(cfg_.n_samples) *
                              static_cast<std::size_t>(cfg_.thin);
    std::size_t accepted = 0;
    std::size_t stored = 0;
    std::vector<double> reported(d_);
    for (std::size_t t = 0; t < total; ++t) {
      accepted += step() ? 1 : 0;
      if ((t + 1) % static_cast<std::size_t>(cfg_.thin) == 0) {
        target_.report(x_, reported);
        std::copy(reported.begin(), reported.end(),
                  out_draws.begin() + static_cast<std::ptrdiff_t>(stored * d_));
        ++stored;
      }
    }
    acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
  }

 private:
  // Warmup runs in doubling adaptation windows. Each window accumulates
  // fresh moment estimates under the current proposal shape; at its end
  // the proposal (marginal scales or covariance factor) is rebuilt from
  // that window alone and the accumulator resets, so early badly-mixing
  // draws cannot poison the final estimate. The global scale keeps
  // adapting by Robbins-Monro, with its clock restarted per window.
  void warmup() {
    const std::size_t w = static_cast<std::size_t>(cfg_.n_warmup);
    const std::size_t phase1 = std::max<std::size_t>(75, w * 15 / 100);
    const std::size_t tail = std::max<std::size_t>(50, w / 10);
    std::size_t window_len = std::max<std::size_t>(2 * d_ + 50, 100);

    const std::size_t stuck_window = std::max<std::size_t>(100, w / 10);
    std::size_t stuck_accepts = 0, stuck_t = 0;
    auto stuck_check = [&](bool acc) {
      stuck_accepts += acc ? 1 : 0;
      if (++stuck_t % stuck_window == 0) {
        if (stuck_accepts == 0)
          throw SamplingError(
              "stuck chain: no accepted proposal in a warmup window of " +
              std::to_string(stuck_window) + " iterations (log density " +
              std::to_string(lp_) + ", global scale " +
              std::to_string(std::exp(log_lambda_)) + ")");
        stuck_accepts = 0;
      }
    };

    // a covariance estimate needs clearly more accepted points than
    // dimensions, or it comes out rank-deficient and freezes directions
    if (full_cov_)
      window_len = std::max<std::size_t>(10 * d_, window_len);

    std::size_t t = 0;
    std::size_t rm_clock = 0;
    auto adapt_lambda = [&] {
      const double eta = std::pow(static_cast<double>(++rm_clock), -0.6);
      log_lambda_ += eta * (last_alpha_ - cfg_.target_acceptance);
      log_lambda_ = std::clamp(log_lambda_, -40.0, 10.0);
    };

    // phase 1: tune the global scale only
    for (; t < phase1 && t < w; ++t) {
      stuck_check(step());
      adapt_lambda();
    }

    // moment-estimation windows, doubling until the tail
    while (t + tail < w) {
      std::size_t remaining = w - tail - t;
      std::size_t this_window = window_len;
      // absorb the remainder when the next window would not fit
      if (remaining < window_len * 3) this_window = remaining;
      reset_moments();
      rm_clock = 0;
      for (std::size_t i = 0; i < this_window; ++i, ++t) {
        stuck_check(step());
        adapt_lambda();
        welford_update();
      }
      if (welford_n_ >= 10) {
        refresh_scales();
        if (full_cov_ && welford_n_ >= d_ + 10) refresh_cholesky();
        // new proposal shape: restart the scale search near the optimum
        log_lambda_ = std::log(2.38 / std::sqrt(static_cast<double>(d_)));
        rm_clock = 0;
      }
      window_len *= 2;
    }

    // tail: settle the global scale under the frozen shape
    for (; t < w; ++t) {
      stuck_check(step());
      adapt_lambda();
    }
  }

  bool step() {
    const double lambda = std::exp(log_lambda_);
    for (std::size_t i = 0; i < d_; ++i) z_[i] = sample_standard_normal(rng_);
    if (chol_ready_) {
      for (std::size_t i = 0; i < d_; ++i) {
        double move = 0.0;
        const double* row = chol_.data() + i * d_;
        for (std::size_t k = 0; k <= i; ++k) move += row[k] * z_[k];
        y_[i] = x_[i] + lambda * move;
      }
    } else {
      for (std::size_t i = 0; i < d_; ++i)
        y_[i] = x_[i] + lambda * scale_[i] * z_[i];
    }
    const double lpy = target_.log_density(y_);
    double log_ratio = lpy - lp_;
    if (std::isnan(log_ratio)) log_ratio = kNegInfLocal;
    last_alpha_ = log_ratio >= 0.0 ? 1.0 : std::exp(std::max(log_ratio, -745.0));
    if (std::isnan(last_alpha_)) last_alpha_ = 0.0;
    if (std::log(rng_.uniform()) < log_ratio) {
      std::swap(x_, y_);
      lp_ = lpy;
      return true;
    }
    return false;
  }

  void reset_moments() {
    welford_n_ = 0;
    std::fill(welford_mean_.begin(), welford_mean_.end(), 0.0);
    std::fill(welford_m2_.begin(), welford_m2_.end(), 0.0);
    if (full_cov_) std::fill(cov_m2_.begin(), cov_m2_.end(), 0.0);
  }

  void welford_update() {
    ++welford_n_;
    const double n = static_cast<double>(welford_n_);
    if (full_cov_) {
      delta_old_.resize(d_);
      delta_new_.resize(d_);
    }
    for (std::size_t i = 0; i < d_; ++i) {
      const double delta = x_[i] - welford_mean_[i];
      if (full_cov_) delta_old_[i] = delta;
      welford_mean_[i] += delta / n;
      const double delta2 = x_[i] - welford_mean_[i];
      if (full_cov_) delta_new_[i] = delta2;
      welford_m2_[i] += delta * delta2;
    }
    if (full_cov_) {
      // cov_m2 += (x - mean_old)(x - mean_new)^T
      for (std::size_t i = 0; i < d_; ++i) {
        double* row = cov_m2_.data() + i * d_;
        const double di = delta_old_[i];
        for (std::size_t j = 0; j < d_; ++j) row[j] += di * delta_new_[j];
      }
    }
  }

  void refresh_scales() {
    if (welford_n_ < 2) return;
    const double n = static_cast<double>(welford_n_);
    for (std::size_t i = 0; i < d_; ++i) {
      const double var = welford_m2_[i] / (n - 1.0);
      scale_[i] = std::sqrt(var + 1e-12);
    }
  }

  void refresh_cholesky() {
    if (welford_n_ < d_ + 10) return;
    const double n = static_cast<double>(welford_n_);
    std::vector<double> c(cov_m2_);
    for (auto& v : c) v /= (n - 1.0);
    // shrink toward the marginal-variance diagonal: keeps the factor
    // positive definite and leaves no direction with a collapsed scale,
    // so the next window can still explore and re-estimate it
    const double blend = std::max(0.01, static_cast<double>(d_) / (4.0 * n));
    double jitter = 1e-12;
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::vector<double> trial(c);
      for (std::size_t i = 0; i < d_; ++i) {
        const double marginal = welford_m2_[i] / (n - 1.0);
        trial[i * d_ + i] += blend * std::max(marginal, 1e-12) + jitter;
      }
      if (cholesky_lower(trial, d_)) {
        chol_ = std::move(trial);
        chol_ready_ = true;
        return;
      }
      jitter = std::max(jitter * 1000.0, 1e-8);
    }
    // keep the previous factor (or stay diagonal) when the estimate is bad
  }

  static constexpr double kNegInfLocal = -std::numeric_limits<double>::infinity();

  const TargetDensity& target_;
  const SamplerConfig& cfg_;
  Rng rng_;
  std::size_t d_;
  bool full_cov_ = false;
  bool chol_ready_ = false;
  std::vector<double> x_, y_, z_, scale_, welford_mean_, welford_m2_;
  std::vector<double> cov_m2_, chol_, delta_old_, delta_new_;
  double lp_ = 0.0;
  double log_lambda_ = 0.0;
  double last_alpha_ = 0.0;
  std::size_t welford_n_ = 0;
};

// One independent affine-invariant ensemble (stretch moves over two
// half-ensembles). Walker count is 2*dim+2 rounded up to even; warmup and
// sample counts are given in draws and divided into whole rounds of
// walker updates internally. No tuning parameters beyond the stretch
// scale: moves are invariant under affine reparameterisation, which makes
// the kernel immune to the correlation structure the random-walk variants
// must learn.
class EnsembleChain {
 public:
  EnsembleChain(const TargetDensity& target, const SamplerConfig& cfg, Rng rng)
      : target_(target), cfg_(cfg), rng_(rng), d_(target.dim()) {
    k_ = 2 * d_ + 2;
    if (k_ % 2 != 0) ++k_;
    walkers_.assign(k_, std::vector<double>());
    lp_.assign(k_, 0.0);
    const auto base = target_.initial_point();
    if (base.size() != d_) throw InvalidInput("initial point dimension mismatch");
    const double spread = std::max(cfg_.init_jitter, 0.05);
    for (std::size_t w = 0; w < k_; ++w) {
      walkers_[w] = base;
      for (auto& v : walkers_[w]) v += rng_.uniform(-spread, spread);
      lp_[w] = target_.log_density(walkers_[w]);
      if (!std::isfinite(lp_[w]))
        throw SamplingError("non-finite log density at an initial walker");
    }
    y_.resize(d_);
  }

  std::size_t walkers() const { return k_; }

  void run(std::span<double> out_draws, std::size_t n_store,
           double& acceptance_rate) {
    const std::size_t warm_rounds =
        (static_cast<std::size_t>(cfg_.n_warmup) + k_ - 1) / k_;

    // stuck detection over whole rounds
    const std::size_t window_rounds = std::max<std::size_t>(4, warm_rounds / 10);
    std::size_t window_accepts = 0;
    for (std::size_t r = 0; r < warm_rounds; ++r) {
      window_accepts += round();
      if ((r + 1) % window_rounds == 0) {
        if (window_accepts == 0)
          throw SamplingError("stuck ensemble: no accepted move in " +
                              std::to_string(window_rounds * k_) +
                              " walker updates during warmup");
        window_accepts = 0;
      }
    }

    std::size_t accepted = 0, total = 0, stored = 0;
    std::vector<double> reported(d_);
    const auto thin = static_cast<std::size_t>(cfg_.thin);
    std::size_t round_index = 0;
    while (stored < n_store) {
      accepted += round();
      total += k_;
      if (++round_index % thin != 0) continue;
      for (std::size_t w = 0; w < k_ && stored < n_store; ++w, ++stored) {
        target_.report(walkers_[w], reported);
        std::copy(reported.begin(), reported.end(),
                  out_draws.begin() + static_cast<std::ptrdiff_t>(stored * d_));
      }
    }
    acceptance_rate =
        total > 0 ? static_cast<double>(accepted) / static_cast<double>(total) : 0.0;
  }

 private:
  // one round updates every walker once, half-ensemble by half-ensemble
  std::size_t round() {
    std::size_t accepted = 0;
    const std::size_t half = k_ / 2;
    accepted += update_half(0, half, half, k_ - half);
    accepted += update_half(half, k_ - half, 0, half);
    return accepted;
  }

  std::size_t update_half(std::size_t begin, std::size_t count,
                          std::size_t other_begin, std::size_t other_count) {
    std::size_t accepted = 0;
    const double a = cfg_.stretch_a;
    for (std::size_t w = begin; w < begin + count; ++w) {
      const auto& partner =
          walkers_[other_begin + rng_.uniform_index(other_count)];
      // z ~ g(z) proportional to 1/sqrt(z) on [1/a, a]
      const double u = rng_.uniform();
      const double z = (u * (a - 1.0) + 1.0) * (u * (a - 1.0) + 1.0) / a;
      for (std::size_t i = 0; i < d_; ++i)
        y_[i] = partner[i] + z * (walkers_[w][i] - partner[i]);
      const double lpy = target_.log_density(y_);
      double log_ratio =
          (static_cast<double>(d_) - 1.0) * std::log(z) + lpy - lp_[w];
      if (std::isnan(log_ratio)) log_ratio = kNegInf;
      if (std::log(rng_.uniform()) < log_ratio) {
        walkers_[w].assign(y_.begin(), y_.end());
        lp_[w] = lpy;
        ++accepted;
      }
    }
    return accepted;
  }

  const TargetDensity& target_;
  const SamplerConfig& cfg_;
  Rng rng_;
  std::size_t d_;
  std::size_t k_ = 0;
  std::vector<std::vector<double>> walkers_;
  std::vector<double> lp_, y_;
};

// Hamiltonian chain: leapfrog trajectories with a jittered step count, a
// diagonal mass matrix re-estimated over doubling warmup windows, and the
// step size tuned by dual averaging toward the target acceptance.
class HmcChain {
 public:
  HmcChain(const TargetDensity& target, const SamplerConfig& cfg, Rng rng)
      : target_(target), cfg_(cfg), rng_(rng), d_(target.dim()) {
    if (!target.has_gradient())
      throw InvalidInput("hmc requires a target with a gradient");
    x_ = target_.initial_point();
    if (x_.size() != d_) throw InvalidInput("initial point dimension mismatch");
    for (auto& v : x_) v += rng_.uniform(-cfg_.init_jitter, cfg_.init_jitter);
    grad_.resize(d_);
    lp_ = target_.log_density_gradient(x_, grad_);
    if (!std::isfinite(lp_))
      throw SamplingError("non-finite log density at the initial point");
    inv_mass_.assign(d_, 1.0);
    welford_mean_.assign(d_, 0.0);
    welford_m2_.assign(d_, 0.0);
    p_.resize(d_);
    x_prop_.resize(d_);
    grad_prop_.resize(d_);
    find_initial_step_size();
  }

  void run(std::span<double> out_draws, double& acceptance_rate) {
    warmup();
    const std::size_t total = static_cast<std::size_t>(cfg_.n_samples) *
                              static_cast<std::size_t>(cfg_.thin);
    double alpha_sum = 0.0;
    std::size_t stored = 0;
    std::vector<double> reported(d_);
    for (std::size_t t = 0; t < total; ++t) {
      alpha_sum += transition();
      if ((t + 1) % static_cast<std::size_t>(cfg_.thin) == 0) {
        target_.report(x_, reported);
        std::copy(reported.begin(), reported.end(),
                  out_draws.begin() + static_cast<std::ptrdiff_t>(stored * d_));
        ++stored;
      }
    }
    acceptance_rate = alpha_sum / static_cast<double>(total);
  }

 private:
  // One trajectory; returns the acceptance statistic used for averaging.
  double transition() {
    for (std::size_t i = 0; i < d_; ++i)
      p_[i] = sample_standard_normal(rng_) / std::sqrt(inv_mass_[i]);
    const double h0 = hamiltonian(lp_, p_);

    x_prop_.assign(x_.begin(), x_.end());
    grad_prop_.assign(grad_.begin(), grad_.end());
    double lp_prop = lp_;

    const auto steps = 1 + rng_.uniform_index(
                               static_cast<std::uint64_t>(cfg_.hmc_leapfrog));
    bool diverged = false;
    for (std::size_t i = 0; i < d_; ++i) p_[i] += 0.5 * eps_ * grad_prop_[i];
    for (std::uint64_t s = 0; s < steps; ++s) {
      for (std::size_t i = 0; i < d_; ++i)
        x_prop_[i] += eps_ * inv_mass_[i] * p_[i];
      lp_prop = target_.log_density_gradient(x_prop_, grad_prop_);
      if (!std::isfinite(lp_prop)) {
        diverged = true;
        break;
      }
      const double scale = (s + 1 == steps) ? 0.5 : 1.0;
      for (std::size_t i = 0; i < d_; ++i)
        p_[i] += scale * eps_ * grad_prop_[i];
    }

    double alpha = 0.0;
    if (!diverged) {
      const double h1 = hamiltonian(lp_prop, p_);
      const double log_ratio = h0 - h1;
      alpha = log_ratio >= 0.0 ? 1.0
                               : (std::isnan(log_ratio)
                                      ? 0.0
                                      : std::exp(std::max(log_ratio, -745.0)));
      if (std::log(rng_.uniform()) < log_ratio) {
        std::swap(x_, x_prop_);
        std::swap(grad_, grad_prop_);
        lp_ = lp_prop;
      }
    }
    last_alpha_ = alpha;
    return alpha;
  }

  double hamiltonian(double lp, const std::vector<double>& p) const {
    double kinetic = 0.0;
    for (std::size_t i = 0; i < d_; ++i) kinetic += inv_mass_[i] * p[i] * p[i];
    return -lp + 0.5 * kinetic;
  }

  // double/halve the step size until one-step acceptance crosses 1/2
  void find_initial_step_size() {
    eps_ = 0.1 / std::pow(static_cast<double>(d_), 0.25);
    auto one_step_alpha = [&]() {
      Rng probe = rng_.split(777);
      for (std::size_t i = 0; i < d_; ++i)
        p_[i] = sample_standard_normal(probe) / std::sqrt(inv_mass_[i]);
      const double h0 = hamiltonian(lp_, p_);
      x_prop_.assign(x_.begin(), x_.end());
      grad_prop_.assign(grad_.begin(), grad_.end());
      for (std::size_t i = 0; i < d_; ++i) p_[i] += 0.5 * eps_ * grad_prop_[i];
      for (std::size_t i = 0; i < d_; ++i)
        x_prop_[i] += eps_ * inv_mass_[i] * p_[i];
      const double lp1 = target_.log_density_gradient(x_prop_, grad_prop_);
      if (!std::isfinite(lp1)) return 0.0;
      for (std::size_t i = 0; i < d_; ++i) p_[i] += 0.5 * eps_ * grad_prop_[i];
      const double h1 = hamiltonian(lp1, p_);
      return std::min(1.0, std::exp(std::min(h0 - h1, 700.0)));
    };
    const bool grow = one_step_alpha() > 0.5;
    for (int it = 0; it < 60; ++it) {
      eps_ *= grow ? 2.0 : 0.5;
      const double alpha = one_step_alpha();
      if (grow && alpha < 0.5) break;
      if (!grow && alpha > 0.5) break;
      if (eps_ < 1e-12 || eps_ > 1e6) break;
    }
  }

  void warmup() {
    const std::size_t w = static_cast<std::size_t>(cfg_.n_warmup);
    const std::size_t phase1 = std::max<std::size_t>(40, w * 15 / 100);
    const std::size_t tail = std::max<std::size_t>(30, w / 10);
    std::size_t window_len = std::max<std::size_t>(50, 2 * d_ / 5);

    const std::size_t stuck_window = std::max<std::size_t>(50, w / 10);
    std::size_t stuck_t = 0;
    double stuck_alpha = 0.0;
    auto stuck_check = [&](double alpha) {
      stuck_alpha += alpha;
      if (++stuck_t % stuck_window == 0) {
        if (stuck_alpha <= 0.0)
          throw SamplingError(
              "stuck chain: zero acceptance over a warmup window of " +
              std::to_string(stuck_window) + " trajectories (step size " +
              std::to_string(eps_) + ")");
        stuck_alpha = 0.0;
      }
    };

    dual_averaging_reset();
    std::size_t t = 0;
    for (; t < phase1 && t < w; ++t) {
      stuck_check(transition());
      dual_averaging_update();
    }

    while (t + tail < w) {
      std::size_t remaining = w - tail - t;
      std::size_t this_window = window_len;
      if (remaining < window_len * 3) this_window = remaining;
      reset_moments();
      for (std::size_t i = 0; i < this_window; ++i, ++t) {
        stuck_check(transition());
        dual_averaging_update();
        welford_update();
      }
      if (welford_n_ >= 20) {
        const double n = static_cast<double>(welford_n_);
        for (std::size_t i = 0; i < d_; ++i)
          inv_mass_[i] = welford_m2_[i] / (n - 1.0) + 1e-8;
        find_initial_step_size();
        dual_averaging_reset();
      }
      window_len *= 2;
    }

    for (; t < w; ++t) {
      stuck_check(transition());
      dual_averaging_update();
    }
    eps_ = std::exp(log_eps_bar_);
  }

  void dual_averaging_reset() {
    da_mu_ = std::log(10.0 * eps_);
    da_hbar_ = 0.0;
    log_eps_bar_ = std::log(eps_);
    da_m_ = 0;
  }

  void dual_averaging_update() {
    ++da_m_;
    const double m = static_cast<double>(da_m_);
    const double t0 = 10.0, gamma = 0.05, kappa = 0.75;
    da_hbar_ = (1.0 - 1.0 / (m + t0)) * da_hbar_ +
               (1.0 / (m + t0)) * (cfg_.target_acceptance - last_alpha_);
    const double log_eps = da_mu_ - std::sqrt(m) / gamma * da_hbar_;
    const double w = std::pow(m, -kappa);
    log_eps_bar_ = w * log_eps + (1.0 - w) * log_eps_bar_;
    eps_ = std::exp(std::clamp(log_eps, -30.0, 10.0));
  }

  void reset_moments() {
    welford_n_ = 0;
    std::fill(welford_mean_.begin(), welford_mean_.end(), 0.0);
    std::fill(welford_m2_.begin(), welford_m2_.end(), 0.0);
  }

  void welford_update() {
    ++welford_n_;
    const double n = static_cast<double>(welford_n_);
    for (std::size_t i = 0; i < d_; ++i) {
      const double delta = x_[i] - welford_mean_[i];
      welford_mean_[i] += delta / n;
      welford_m2_[i] += delta * (x_[i] - welford_mean_[i]);
    }
  }

  const TargetDensity& target_;
  const SamplerConfig& cfg_;
  Rng rng_;
  std::size_t d_;
  std::vector<double> x_, p_, grad_, x_prop_, grad_prop_;
  std::vector<double> inv_mass_, welford_mean_, welford_m2_;
  double lp_ = 0.0;
  double eps_ = 0.1;
  double last_alpha_ = 0.0;
  double da_mu_ = 0.0, da_hbar_ = 0.0, log_eps_bar_ = 0.0;
  std::size_t da_m_ = 0;
  std::size_t welford_n_ = 0;
};

}  // namespace detail

// Run n_chains samplers concurrently (one random-walk chain or one
// independent ensemble per "chain"). Deterministic given (rng, config);
// chain c uses the stream rng.split(c).
inline ChainSet run_mcmc(const TargetDensity& target, const SamplerConfig& config,
                         const Rng& rng) {
  config.validate();
  if (target.dim() < 1) throw InvalidInput("run_mcmc: dimension must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();
  ChainSet cs;
  cs.n_chains = static_cast<std::size_t>(config.n_chains);
  cs.n_draws = static_cast<std::size_t>(config.n_samples);
  cs.n_params = target.dim();
  cs.parameter_names = target.parameter_names();
  cs.config = config;
  cs.draws.assign(cs.n_chains * cs.n_draws * cs.n_params, 0.0);
  cs.acceptance_rates.assign(cs.n_chains, 0.0);

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const std::size_t n_threads =
      std::min<std::size_t>(cs.n_chains,
                            config.max_threads > 0
                                ? static_cast<std::size_t>(config.max_threads)
                                : hw);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cs.n_chains);
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= cs.n_chains) return;
      try {
        std::span<double> slab{cs.draws.data() + c * cs.n_draws * cs.n_params,
                               cs.n_draws * cs.n_params};
        if (config.algorithm == "ensemble_stretch") {
          detail::EnsembleChain chain(target, config, rng.split(c));
          chain.run(slab, cs.n_draws, cs.acceptance_rates[c]);
        } else if (config.algorithm == "hmc") {
          detail::HmcChain chain(target, config, rng.split(c));
          chain.run(slab, cs.acceptance_rates[c]);
        } else {
          detail::RwmChain chain(target, config, rng.split(c));
          chain.run(slab, cs.acceptance_rates[c]);
        }
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  cs.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cs;
}

}  // namespace tqa
