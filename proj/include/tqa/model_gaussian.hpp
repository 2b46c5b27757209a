#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tqa/data_model.hpp"
#include "tqa/distributions.hpp"
#include "tqa/errors.hpp"
#include "tqa/inference.hpp"

namespace tqa {

// Per-job latent quality plus additive reviewer offset and noise.
struct GaussianParams {
  std::vector<double> q;      // latent job quality, one per job, >= 0
  std::vector<double> beta;   // reviewer offset (strictness), one per reviewer
  std::vector<double> sigma;  // reviewer noise sd, one per reviewer, > 0
};

// Observation model: score_j ~ N(q_j + beta_r(j), sigma_r(j)^2), with
// priors q ~ Gamma(1,3), beta ~ N(0,10^2), sigma ~ N(0,1) truncated at 0.
// Intended to be built on a single-language slice; the caller slices.
class GaussianModel : public TargetDensity {
 public:
  explicit GaussianModel(const Dataset& slice) {
    if (slice.empty()) throw InvalidInput("GaussianModel: empty dataset");
    const auto& records = slice.records();
    std::map<std::string, std::uint32_t> rev_index;
    for (const auto& id : slice.reviewers())
      rev_index.emplace(id, static_cast<std::uint32_t>(rev_index.size()));
    reviewer_ids_ = slice.reviewers();
    job_ids_.reserve(records.size());
    ept_.reserve(records.size());
    rev_of_job_.reserve(records.size());
    for (const auto& r : records) {
      job_ids_.push_back(r.job_id);
      ept_.push_back(r.ept);
      rev_of_job_.push_back(rev_index.at(r.reviewer_id));
    }
  }

  std::size_t n_jobs() const { return job_ids_.size(); }
  std::size_t n_reviewers() const { return reviewer_ids_.size(); }
  std::size_t dim() const override { return n_jobs() + 2 * n_reviewers(); }

  const std::vector<std::string>& job_ids() const { return job_ids_; }
  const std::vector<std::string>& reviewer_ids() const { return reviewer_ids_; }
  const std::vector<double>& observed() const { return ept_; }
  std::uint32_t reviewer_of_job(std::size_t j) const { return rev_of_job_[j]; }

  // ---- constrained-space evaluation ----

  double log_posterior(const GaussianParams& p) const {
    check_dims(p);
    double lp = 0.0;
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      if (!(p.q[j] >= 0.0)) throw InvalidInput("GaussianModel: q must be >= 0");
      lp += kGammaPrior.log_pdf(p.q[j]);
    }
    for (std::size_t r = 0; r < n_reviewers(); ++r) {
      if (!(p.sigma[r] > 0.0))
        throw InvalidInput("GaussianModel: sigma must be > 0");
      lp += kBetaPrior.log_pdf(p.beta[r]);
      lp += kSigmaPrior.log_pdf(p.sigma[r]);
    }
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      const auto r = rev_of_job_[j];
      lp += normal_log_pdf(ept_[j], p.q[j] + p.beta[r], p.sigma[r]);
    }
    return lp;
  }

  // ---- unconstrained bijection: q and sigma through log, beta identity ----

  std::vector<double> unconstrain(const GaussianParams& p) const {
    check_dims(p);
    std::vector<double> u(dim());
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      if (!(p.q[j] > 0.0) || !std::isfinite(p.q[j]))
        throw InvalidInput("unconstrain: q must be finite and > 0");
      u[j] = std::log(p.q[j]);
    }
    const std::size_t b0 = n_jobs(), s0 = n_jobs() + n_reviewers();
    for (std::size_t r = 0; r < n_reviewers(); ++r) {
      if (!std::isfinite(p.beta[r]))
        throw InvalidInput("unconstrain: beta must be finite");
      if (!(p.sigma[r] > 0.0) || !std::isfinite(p.sigma[r]))
        throw InvalidInput("unconstrain: sigma must be finite and > 0");
      u[b0 + r] = p.beta[r];
      u[s0 + r] = std::log(p.sigma[r]);
    }
    return u;
  }

  GaussianParams constrain(std::span<const double> u) const {
    if (u.size() != dim()) throw InvalidInput("constrain: dimension mismatch");
    GaussianParams p;
    p.q.resize(n_jobs());
    p.beta.resize(n_reviewers());
    p.sigma.resize(n_reviewers());
    for (std::size_t j = 0; j < n_jobs(); ++j) p.q[j] = std::exp(u[j]);
    const std::size_t b0 = n_jobs(), s0 = n_jobs() + n_reviewers();
    for (std::size_t r = 0; r < n_reviewers(); ++r) {
      p.beta[r] = u[b0 + r];
      p.sigma[r] = std::exp(u[s0 + r]);
    }
    return p;
  }

  // log |d constrained / d unconstrained| = sum log q + sum log sigma
  double log_jacobian(std::span<const double> u) const {
    if (u.size() != dim()) throw InvalidInput("log_jacobian: dimension mismatch");
    double lj = 0.0;
    for (std::size_t j = 0; j < n_jobs(); ++j) lj += u[j];
    const std::size_t s0 = n_jobs() + n_reviewers();
    for (std::size_t r = 0; r < n_reviewers(); ++r) lj += u[s0 + r];
    return lj;
  }

  // ---- sampler interface ----

  double log_density(std::span<const double> u) const override {
    const std::size_t nj = n_jobs(), nr = n_reviewers();
    const std::size_t b0 = nj, s0 = nj + nr;
    double lp = 0.0;
    // per-thread scratch keeps concurrent chain evaluations independent
    thread_local std::vector<double> sigma_buf_, log_sigma_buf_;
    sigma_buf_.resize(nr);
    log_sigma_buf_.resize(nr);
    for (std::size_t r = 0; r < nr; ++r) {
      const double beta = u[b0 + r];
      const double ls = u[s0 + r];
      const double sigma = std::exp(ls);
      if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;
      sigma_buf_[r] = sigma;
      log_sigma_buf_[r] = ls;
      // beta ~ N(0, 10^2)
      lp += -0.5 * (beta / 10.0) * (beta / 10.0) - kLogBetaPriorNorm;
      // sigma ~ N(0,1) truncated at 0, plus Jacobian ls
      lp += M_LN2 - 0.5 * sigma * sigma - kLnSqrt2Pi + ls;
    }
    // jobs: q = exp(u), prior Gamma(1,3) = Exponential(mean 3), Jacobian u
    for (std::size_t j = 0; j < nj; ++j) {
      const double q = std::exp(u[j]);
      if (!std::isfinite(q)) return kNegInf;
      lp += -kLn3 - q / 3.0 + u[j];
      const auto r = rev_of_job_[j];
      const double z = (ept_[j] - q - u[b0 + r]) / sigma_buf_[r];
      lp += -0.5 * z * z - log_sigma_buf_[r] - kLnSqrt2Pi;
    }
    return lp;
  }

  bool has_gradient() const override { return true; }

  double log_density_gradient(std::span<const double> u,
                              std::span<double> grad) const override {
    const std::size_t nj = n_jobs(), nr = n_reviewers();
    const std::size_t b0 = nj, s0 = nj + nr;
    thread_local std::vector<double> sigma_buf, log_sigma_buf;
    sigma_buf.resize(nr);
    log_sigma_buf.resize(nr);
    double lp = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      const double beta = u[b0 + r];
      const double ls = u[s0 + r];
      const double sigma = std::exp(ls);
      if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;
      sigma_buf[r] = sigma;
      log_sigma_buf[r] = ls;
      lp += -0.5 * (beta / 10.0) * (beta / 10.0) - kLogBetaPriorNorm;
      lp += M_LN2 - 0.5 * sigma * sigma - kLnSqrt2Pi + ls;
      grad[b0 + r] = -beta / 100.0;
      grad[s0 + r] = 1.0 - sigma * sigma;
    }
    for (std::size_t j = 0; j < nj; ++j) {
      const double q = std::exp(u[j]);
      if (!std::isfinite(q)) return kNegInf;
      lp += -kLn3 - q / 3.0 + u[j];
      const auto r = rev_of_job_[j];
      const double sigma = sigma_buf[r];
      const double z = (ept_[j] - q - u[b0 + r]) / sigma;
      lp += -0.5 * z * z - log_sigma_buf[r] - kLnSqrt2Pi;
      grad[j] = 1.0 - q / 3.0 + (z / sigma) * q;
      grad[b0 + r] += z / sigma;
      grad[s0 + r] += z * z - 1.0;
    }
    return lp;
  }

  void report(std::span<const double> u, std::span<double> out) const override {
    const std::size_t nj = n_jobs(), nr = n_reviewers();
    for (std::size_t j = 0; j < nj; ++j) out[j] = std::exp(u[j]);
    for (std::size_t r = 0; r < nr; ++r) {
      out[nj + r] = u[nj + r];
      out[nj + nr + r] = std::exp(u[nj + nr + r]);
    }
  }

  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    names.reserve(dim());
    for (const auto& id : job_ids_) names.push_back("q[" + id + "]");
    for (const auto& id : reviewer_ids_) names.push_back("beta[" + id + "]");
    for (const auto& id : reviewer_ids_) names.push_back("sigma[" + id + "]");
    return names;
  }

  // q starts at the observed score, beta at 0, sigma at 1. The clip keeps
  // zero-score jobs out of the far log tail, where burn-in stalls.
  std::vector<double> initial_point() const override {
    std::vector<double> u(dim(), 0.0);
    for (std::size_t j = 0; j < n_jobs(); ++j)
      u[j] = std::log(std::max(ept_[j], 0.05));
    return u;
  }

  // One replicated dataset from one reported (natural-space) draw.
  // Negative replicated scores are legal for this model and preserved.
  void replicate(std::span<const double> draw, Rng& rng,
                 std::span<double> out) const {
    if (draw.size() != dim() || out.size() != n_jobs())
      throw InvalidInput("replicate: dimension mismatch");
    const std::size_t b0 = n_jobs(), s0 = n_jobs() + n_reviewers();
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      const auto r = rev_of_job_[j];
      out[j] = draw[j] + draw[b0 + r] +
               draw[s0 + r] * sample_standard_normal(rng);
    }
  }

  GaussianParams params_from_draw(std::span<const double> draw) const {
    if (draw.size() != dim()) throw InvalidInput("params_from_draw: size mismatch");
    GaussianParams p;
    const std::size_t b0 = n_jobs(), s0 = n_jobs() + n_reviewers();
    p.q.assign(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(b0));
    p.beta.assign(draw.begin() + static_cast<std::ptrdiff_t>(b0),
                  draw.begin() + static_cast<std::ptrdiff_t>(s0));
    p.sigma.assign(draw.begin() + static_cast<std::ptrdiff_t>(s0), draw.end());
    return p;
  }

  // Marginal log-likelihood of one observation with the latent quality
  // integrated out: Exponential(mean 3) prior x normal noise is an
  // exponentially modified Gaussian.
  //   log p(e | beta, sigma) = ln(1/3) + sigma^2/18 - (e-beta)/3
  //                            + log Phi(((e-beta) - sigma^2/3)/sigma)
  double marginal_log_likelihood(double e, double beta, double sigma) const {
    const double x = e - beta;
    const double t = (x - sigma * sigma / 3.0) / sigma;
    return -kLn3 + sigma * sigma / 18.0 - x / 3.0 + normal_logcdf(t);
  }

  // Exact conditional of one latent quality given (beta, sigma): a normal
  // shifted by the exponential tilt and truncated at zero.
  TruncatedNormal quality_conditional(double e, double beta, double sigma) const {
    return TruncatedNormal(e - beta - sigma * sigma / 3.0, sigma);
  }

 private:
  void check_dims(const GaussianParams& p) const {
    if (p.q.size() != n_jobs() || p.beta.size() != n_reviewers() ||
        p.sigma.size() != n_reviewers())
      throw InvalidInput("GaussianModel: parameter dimensions do not match data");
  }

  static constexpr double kLn3 = 1.0986122886681098;
  // ln(10) + ln sqrt(2*pi), the N(0,10^2) normaliser
  static constexpr double kLogBetaPriorNorm = 3.2215236261987186;

  inline static const Gamma kGammaPrior{1.0, 3.0};
  inline static const Normal kBetaPrior{0.0, 10.0};
  inline static const TruncatedNormal kSigmaPrior{0.0, 1.0};

  std::vector<std::string> job_ids_;
  std::vector<std::string> reviewer_ids_;
  std::vector<double> ept_;
  std::vector<std::uint32_t> rev_of_job_;
};

// Collapsed target over (beta_r, log sigma_r) only, with every latent
// quality integrated out analytically. The reviewers' posteriors are
// mutually independent here, so this target is easy for any kernel at any
// data size. Reported draws are (beta, sigma) in natural space.
class GaussianCollapsedTarget : public TargetDensity {
 public:
  explicit GaussianCollapsedTarget(const GaussianModel& model) : model_(model) {
    const std::size_t nr = model.n_reviewers();
    jobs_by_reviewer_.resize(nr);
    for (std::size_t j = 0; j < model.n_jobs(); ++j)
      jobs_by_reviewer_[model.reviewer_of_job(j)].push_back(j);
  }

  std::size_t dim() const override { return 2 * model_.n_reviewers(); }

  double log_density(std::span<const double> u) const override {
    const std::size_t nr = model_.n_reviewers();
    const auto& e = model_.observed();
    double lp = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      const double beta = u[r];
      const double ls = u[nr + r];
      const double sigma = std::exp(ls);
      if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;
      lp += -0.5 * (beta / 10.0) * (beta / 10.0);
      lp += -0.5 * sigma * sigma + ls;  // truncated-normal prior + Jacobian
      for (const auto j : jobs_by_reviewer_[r])
        lp += model_.marginal_log_likelihood(e[j], beta, sigma);
    }
    return lp;
  }

  bool has_gradient() const override { return true; }

  double log_density_gradient(std::span<const double> u,
                              std::span<double> grad) const override {
    const std::size_t nr = model_.n_reviewers();
    const auto& e = model_.observed();
    double lp = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      const double beta = u[r];
      const double ls = u[nr + r];
      const double sigma = std::exp(ls);
      if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;
      lp += -0.5 * (beta / 10.0) * (beta / 10.0);
      lp += -0.5 * sigma * sigma + ls;
      grad[r] = -beta / 100.0;
      grad[nr + r] = 1.0 - sigma * sigma;
      for (const auto j : jobs_by_reviewer_[r]) {
        const double x = e[j] - beta;
        const double t = (x - sigma * sigma / 3.0) / sigma;
        lp += -kLn3Local + sigma * sigma / 18.0 - x / 3.0 + normal_logcdf(t);
        // Mills ratio phi(t)/Phi(t), stable in the deep tail
        const double mills =
            std::exp(-0.5 * t * t - kLnSqrt2Pi - normal_logcdf(t));
        grad[r] += 1.0 / 3.0 - mills / sigma;
        grad[nr + r] +=
            sigma * sigma / 9.0 + mills * (-x / sigma - sigma / 3.0);
      }
    }
    return lp;
  }

  void report(std::span<const double> u, std::span<double> out) const override {
    const std::size_t nr = model_.n_reviewers();
    for (std::size_t r = 0; r < nr; ++r) {
      out[r] = u[r];
      out[nr + r] = std::exp(u[nr + r]);
    }
  }

  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    for (const auto& id : model_.reviewer_ids()) names.push_back("beta[" + id + "]");
    for (const auto& id : model_.reviewer_ids()) names.push_back("sigma[" + id + "]");
    return names;
  }

  std::vector<double> initial_point() const override {
    return std::vector<double>(dim(), 0.0);  // beta 0, sigma 1
  }

 private:
  static constexpr double kLn3Local = 1.0986122886681098;
  const GaussianModel& model_;
  std::vector<std::vector<std::size_t>> jobs_by_reviewer_;
};

// Fit the additive model by sampling the collapsed (beta, sigma) posterior
// and re-drawing every latent quality from its exact conditional. The
// result is a draw-for-draw sample of the full joint posterior, laid out
// exactly like a direct fit of GaussianModel.
inline ChainSet fit_gaussian_collapsed(const GaussianModel& model,
                                       const SamplerConfig& config,
                                       const Rng& rng) {
  const GaussianCollapsedTarget target(model);
  const ChainSet collapsed = run_mcmc(target, config, rng);

  ChainSet cs;
  cs.n_chains = collapsed.n_chains;
  cs.n_draws = collapsed.n_draws;
  cs.n_params = model.dim();
  cs.parameter_names = model.parameter_names();
  cs.acceptance_rates = collapsed.acceptance_rates;
  cs.config = collapsed.config;
  cs.elapsed_seconds = collapsed.elapsed_seconds;
  cs.draws.assign(cs.n_chains * cs.n_draws * cs.n_params, 0.0);

  const std::size_t nj = model.n_jobs(), nr = model.n_reviewers();
  const auto& e = model.observed();
  const Rng expand_root = rng.split(0x71);
  for (std::size_t c = 0; c < cs.n_chains; ++c) {
    for (std::size_t i = 0; i < cs.n_draws; ++i) {
      const auto src = collapsed.draw_row(c, i);
      const std::size_t base = (c * cs.n_draws + i) * cs.n_params;
      Rng draw_rng = expand_root.split(c * cs.n_draws + i);
      for (std::size_t j = 0; j < nj; ++j) {
        const auto r = model.reviewer_of_job(j);
        cs.draws[base + j] =
            model.quality_conditional(e[j], src[r], src[nr + r]).sample(draw_rng);
      }
      for (std::size_t r = 0; r < nr; ++r) {
        cs.draws[base + nj + r] = src[r];
        cs.draws[base + nj + nr + r] = src[nr + r];
      }
    }
  }
  return cs;
}

}  // namespace tqa
