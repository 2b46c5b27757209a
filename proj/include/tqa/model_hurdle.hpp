#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tqa/data_model.hpp"
#include "tqa/distributions.hpp"
#include "tqa/errors.hpp"
#include "tqa/inference.hpp"

namespace tqa {

// (zero probability, log-location, log-scale) of one multiplicative factor:
// language difficulty, translator error propensity, or reviewer bias.
struct HurdleFactorParams {
  double pi = 0.0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct CollapsedJobParams {
  double pi = 0.0;
  double mu = 0.0;
  double sigma = 1.0;
};

// Reduce the three-factor product to a single hurdle lognormal per job:
// a zero if any factor's atom fires, otherwise a product of lognormals.
inline CollapsedJobParams collapse(const HurdleFactorParams& lang,
                                   const HurdleFactorParams& trans,
                                   const HurdleFactorParams& rev) {
  for (const auto* f : {&lang, &trans, &rev}) {
    if (!(f->pi >= 0.0 && f->pi <= 1.0))
      throw InvalidInput("collapse: pi must be in [0,1]");
    if (!(f->sigma > 0.0)) throw InvalidInput("collapse: sigma must be > 0");
  }
  CollapsedJobParams c;
  c.pi = 1.0 - (1.0 - lang.pi) * (1.0 - trans.pi) * (1.0 - rev.pi);
  c.mu = lang.mu + trans.mu + rev.mu;
  c.sigma = std::sqrt(lang.sigma * lang.sigma + trans.sigma * trans.sigma +
                      rev.sigma * rev.sigma);
  return c;
}

// Full parameter set of one per-language model.
struct HurdleModelParams {
  HurdleFactorParams language;
  std::map<std::string, HurdleFactorParams> translators;
  std::map<std::string, HurdleFactorParams> reviewers;
};

// Prior hyperparameters. The defaults give the reviewer's zero probability
// a lower prior mode than the language's and the translator's, so a perfect
// score is explained by job ease or translator skill before reviewer
// leniency; swap_pi_priors() flips that assignment.
struct HurdlePriors {
  double pi_lang_a = 2.0, pi_lang_b = 5.0;
  double pi_trans_a = 2.0, pi_trans_b = 5.0;
  double pi_rev_a = 1.5, pi_rev_b = 5.0;
  double mu_sd = 1.0;                      // N(0, mu_sd^2) on every mu
  double sigma_mean = 0.5, sigma_sd = 0.5;  // truncated normal on every sigma

  HurdlePriors swapped_pi() const {
    HurdlePriors p = *this;
    std::swap(p.pi_lang_a, p.pi_rev_a);
    std::swap(p.pi_lang_b, p.pi_rev_b);
    p.pi_trans_a = p.pi_lang_a;
    p.pi_trans_b = p.pi_lang_b;
    return p;
  }
};

// Collapsed hurdle-lognormal factor model for one language slice.
// Parameter packing: one (pi, mu, sigma) triple per entity, with the
// language first, then translators, then reviewers, both in sorted id
// order. Unconstrained coordinates are (logit pi, mu, log sigma).
class HurdleModel : public TargetDensity {
 public:
  explicit HurdleModel(const Dataset& slice, HurdlePriors priors = {})
      : priors_(priors) {
    if (slice.empty()) throw InvalidInput("HurdleModel: empty dataset");
    if (slice.languages().size() != 1)
      throw InvalidInput("HurdleModel: expects a single-language slice");
    language_ = slice.languages().front();
    translator_ids_ = slice.translators();
    reviewer_ids_ = slice.reviewers();

    std::map<std::string, std::uint32_t> t_index, r_index;
    for (const auto& id : translator_ids_)
      t_index.emplace(id, static_cast<std::uint32_t>(t_index.size()));
    for (const auto& id : reviewer_ids_)
      r_index.emplace(id, static_cast<std::uint32_t>(r_index.size()));

    const auto& records = slice.records();
    job_ids_.reserve(records.size());
    for (const auto& r : records) {
      job_ids_.push_back(r.job_id);
      ept_.push_back(r.ept);
      is_zero_.push_back(r.ept == 0.0);
      log_ept_.push_back(r.ept > 0.0 ? std::log(r.ept) : 0.0);
      trans_entity_.push_back(1 + t_index.at(r.translator_id));
      rev_entity_.push_back(
          static_cast<std::uint32_t>(1 + translator_ids_.size() + r_index.at(r.reviewer_id)));
    }

    const Beta lang_beta(priors_.pi_lang_a, priors_.pi_lang_b);
    const Beta trans_beta(priors_.pi_trans_a, priors_.pi_trans_b);
    const Beta rev_beta(priors_.pi_rev_a, priors_.pi_rev_b);
    pi_prior_mean_ = {lang_beta.mean(), trans_beta.mean(), rev_beta.mean()};
    beta_log_norm_ = {std::lgamma(priors_.pi_lang_a + priors_.pi_lang_b) -
                          std::lgamma(priors_.pi_lang_a) -
                          std::lgamma(priors_.pi_lang_b),
                      std::lgamma(priors_.pi_trans_a + priors_.pi_trans_b) -
                          std::lgamma(priors_.pi_trans_a) -
                          std::lgamma(priors_.pi_trans_b),
                      std::lgamma(priors_.pi_rev_a + priors_.pi_rev_b) -
                          std::lgamma(priors_.pi_rev_a) -
                          std::lgamma(priors_.pi_rev_b)};
    sigma_prior_log_mass_ = normal_logcdf(priors_.sigma_mean / priors_.sigma_sd);
  }

  std::size_t n_jobs() const { return job_ids_.size(); }
  std::size_t n_translators() const { return translator_ids_.size(); }
  std::size_t n_reviewers() const { return reviewer_ids_.size(); }
  std::size_t n_entities() const { return 1 + n_translators() + n_reviewers(); }
  std::size_t dim() const override { return 3 * n_entities(); }

  const std::string& language() const { return language_; }
  const std::vector<std::string>& translator_ids() const { return translator_ids_; }
  const std::vector<std::string>& reviewer_ids() const { return reviewer_ids_; }
  const std::vector<double>& observed() const { return ept_; }
  const HurdlePriors& priors() const { return priors_; }

  // ---- constrained-space evaluation over the full parameter struct ----

  // Straightforward route through the distribution objects; boundary pi
  // values are legal here and give -inf where they contradict the data.
  double log_posterior(const HurdleModelParams& p) const {
    const auto packed = pack(p);
    const std::size_t ne = n_entities();
    double lp = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const double pi = packed[3 * e];
      const double mu = packed[3 * e + 1];
      const double sigma = packed[3 * e + 2];
      const auto [a, b, log_norm] = role_beta(e);
      (void)log_norm;
      lp += Beta(a, b).log_pdf(pi);
      lp += normal_log_pdf(mu, 0.0, priors_.mu_sd);
      lp += TruncatedNormal(priors_.sigma_mean, priors_.sigma_sd).log_pdf(sigma);
    }
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      const auto c = collapse(read_triple(packed, 0),
                              read_triple(packed, trans_entity_[j]),
                              read_triple(packed, rev_entity_[j]));
      lp += HurdleLognormal(c.pi, c.mu, c.sigma).log_pdf(ept_[j]);
      if (lp == kNegInf) return kNegInf;
    }
    return lp;
  }

  // ---- packing between the struct and the flat constrained vector ----

  std::vector<double> pack(const HurdleModelParams& p) const {
    check_keys(p);
    std::vector<double> v(dim());
    write_triple(v, 0, p.language);
    std::size_t e = 1;
    for (const auto& id : translator_ids_) write_triple(v, e++, p.translators.at(id));
    for (const auto& id : reviewer_ids_) write_triple(v, e++, p.reviewers.at(id));
    return v;
  }

  HurdleModelParams unpack(std::span<const double> packed) const {
    if (packed.size() != dim()) throw InvalidInput("unpack: dimension mismatch");
    HurdleModelParams p;
    p.language = read_triple(packed, 0);
    std::size_t e = 1;
    for (const auto& id : translator_ids_) p.translators[id] = read_triple(packed, e++);
    for (const auto& id : reviewer_ids_) p.reviewers[id] = read_triple(packed, e++);
    return p;
  }

  // ---- unconstrained bijection ----

  std::vector<double> unconstrain(std::span<const double> packed) const {
    if (packed.size() != dim()) throw InvalidInput("unconstrain: dimension mismatch");
    std::vector<double> u(dim());
    for (std::size_t e = 0; e < n_entities(); ++e) {
      const double pi = packed[3 * e];
      const double mu = packed[3 * e + 1];
      const double sigma = packed[3 * e + 2];
      if (!(pi > 0.0 && pi < 1.0))
        throw InvalidInput("unconstrain: pi on the boundary has no image");
      if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu))
        throw InvalidInput("unconstrain: invalid mu/sigma");
      u[3 * e] = std::log(pi) - std::log1p(-pi);
      u[3 * e + 1] = mu;
      u[3 * e + 2] = std::log(sigma);
    }
    return u;
  }

  std::vector<double> constrain(std::span<const double> u) const {
    if (u.size() != dim()) throw InvalidInput("constrain: dimension mismatch");
    std::vector<double> packed(dim());
    for (std::size_t e = 0; e < n_entities(); ++e) {
      packed[3 * e] = 1.0 / (1.0 + std::exp(-u[3 * e]));
      packed[3 * e + 1] = u[3 * e + 1];
      packed[3 * e + 2] = std::exp(u[3 * e + 2]);
    }
    return packed;
  }

  // log |Jacobian| = sum [ln pi + ln(1-pi)] + sum ln sigma
  double log_jacobian(std::span<const double> u) const {
    if (u.size() != dim()) throw InvalidInput("log_jacobian: dimension mismatch");
    double lj = 0.0;
    for (std::size_t e = 0; e < n_entities(); ++e) {
      const double t = u[3 * e];
      lj += log_sigmoid(t) + log_sigmoid(-t) + u[3 * e + 2];
    }
    return lj;
  }

  // ---- sampler interface ----

  double log_density(std::span<const double> u) const override {
    const std::size_t ne = n_entities();
    thread_local std::vector<double> l1mp, mu, var;
    l1mp.resize(ne);
    mu.resize(ne);
    var.resize(ne);

    double lp = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const double t = u[3 * e];
      const double m = u[3 * e + 1];
      const double ls = u[3 * e + 2];
      const double sigma = std::exp(ls);
      if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;
      const double log_pi = log_sigmoid(t);
      const double log_1mpi = log_sigmoid(-t);
      l1mp[e] = log_1mpi;
      mu[e] = m;
      var[e] = sigma * sigma;

      // Beta prior on pi plus the logit Jacobian ln pi + ln(1-pi)
      const auto [a, b, log_norm] = role_beta(e);
      lp += (a - 1.0) * log_pi + (b - 1.0) * log_1mpi + log_norm;
      lp += log_pi + log_1mpi;
      // N(0, mu_sd^2) on mu
      const double zm = m / priors_.mu_sd;
      lp += -0.5 * zm * zm - std::log(priors_.mu_sd) - kLnSqrt2Pi;
      // truncated normal on sigma plus the log Jacobian
      const double zs = (sigma - priors_.sigma_mean) / priors_.sigma_sd;
      lp += -0.5 * zs * zs - std::log(priors_.sigma_sd) - kLnSqrt2Pi -
            sigma_prior_log_mass_ + ls;
    }

    for (std::size_t j = 0; j < n_jobs(); ++j) {
      const std::size_t te = trans_entity_[j], re = rev_entity_[j];
      const double log_1mpi_j = l1mp[0] + l1mp[te] + l1mp[re];
      if (is_zero_[j]) {
        // ln pi_j with pi_j = 1 - exp(log(1-pi_j))
        const double one_minus = -std::expm1(log_1mpi_j);
        if (one_minus <= 0.0) return kNegInf;
        lp += std::log(one_minus);
      } else {
        const double mu_j = mu[0] + mu[te] + mu[re];
        const double var_j = var[0] + var[te] + var[re];
        const double d = log_ept_[j] - mu_j;
        lp += log_1mpi_j - log_ept_[j] - 0.5 * std::log(var_j) - kLnSqrt2Pi -
              0.5 * d * d / var_j;
      }
    }
    return lp;
  }

  bool has_gradient() const override { return true; }

  double log_density_gradient(std::span<const double> u,
                              std::span<double> grad) const override {
    const std::size_t ne = n_entities();
    thread_local std::vector<double> pi, l1mp, mu, var;
    pi.resize(ne);
    l1mp.resize(ne);
    mu.resize(ne);
    var.resize(ne);
    std::fill(grad.begin(), grad.end(), 0.0);

    double lp = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const double t = u[3 * e];
      const double m = u[3 * e + 1];
      const double ls = u[3 * e + 2];
      const double sigma = std::exp(ls);
      if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;
      const double log_pi = log_sigmoid(t);
      const double log_1mpi = log_sigmoid(-t);
      pi[e] = std::exp(log_pi);
      l1mp[e] = log_1mpi;
      mu[e] = m;
      var[e] = sigma * sigma;

      const auto [a, b, log_norm] = role_beta(e);
      lp += (a - 1.0) * log_pi + (b - 1.0) * log_1mpi + log_norm;
      lp += log_pi + log_1mpi;
      grad[3 * e] = a * (1.0 - pi[e]) - b * pi[e];

      const double zm = m / priors_.mu_sd;
      lp += -0.5 * zm * zm - std::log(priors_.mu_sd) - kLnSqrt2Pi;
      grad[3 * e + 1] = -m / (priors_.mu_sd * priors_.mu_sd);

      const double zs = (sigma - priors_.sigma_mean) / priors_.sigma_sd;
      lp += -0.5 * zs * zs - std::log(priors_.sigma_sd) - kLnSqrt2Pi -
            sigma_prior_log_mass_ + ls;
      grad[3 * e + 2] =
          -(sigma - priors_.sigma_mean) * sigma /
              (priors_.sigma_sd * priors_.sigma_sd) +
          1.0;
    }

    for (std::size_t j = 0; j < n_jobs(); ++j) {
      const std::size_t te = trans_entity_[j], re = rev_entity_[j];
      const double log_1mpi_j = l1mp[0] + l1mp[te] + l1mp[re];
      if (is_zero_[j]) {
        const double one_minus = -std::expm1(log_1mpi_j);
        if (one_minus <= 0.0) return kNegInf;
        lp += std::log(one_minus);
        // d/dt of ln pi_j through S = ln(1 - pi_j)
        const double ratio = std::exp(log_1mpi_j) / one_minus;
        grad[0] += pi[0] * ratio;
        grad[3 * te] += pi[te] * ratio;
        grad[3 * re] += pi[re] * ratio;
      } else {
        const double mu_j = mu[0] + mu[te] + mu[re];
        const double var_j = var[0] + var[te] + var[re];
        const double d = log_ept_[j] - mu_j;
        lp += log_1mpi_j - log_ept_[j] - 0.5 * std::log(var_j) - kLnSqrt2Pi -
              0.5 * d * d / var_j;
        grad[0] -= pi[0];
        grad[3 * te] -= pi[te];
        grad[3 * re] -= pi[re];
        const double dmu = d / var_j;
        grad[1] += dmu;
        grad[3 * te + 1] += dmu;
        grad[3 * re + 1] += dmu;
        const double dvar = (d * d / (var_j * var_j) - 1.0 / var_j);
        grad[2] += var[0] * dvar;
        grad[3 * te + 2] += var[te] * dvar;
        grad[3 * re + 2] += var[re] * dvar;
      }
    }
    return lp;
  }

  void report(std::span<const double> u, std::span<double> out) const override {
    for (std::size_t e = 0; e < n_entities(); ++e) {
      out[3 * e] = 1.0 / (1.0 + std::exp(-u[3 * e]));
      out[3 * e + 1] = u[3 * e + 1];
      out[3 * e + 2] = std::exp(u[3 * e + 2]);
    }
  }

  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    names.reserve(dim());
    names.insert(names.end(), {"pi_l", "mu_l", "sigma_l"});
    for (const auto& id : translator_ids_) {
      names.push_back("pi_t[" + id + "]");
      names.push_back("mu_t[" + id + "]");
      names.push_back("sigma_t[" + id + "]");
    }
    for (const auto& id : reviewer_ids_) {
      names.push_back("pi_r[" + id + "]");
      names.push_back("mu_r[" + id + "]");
      names.push_back("sigma_r[" + id + "]");
    }
    return names;
  }

  // Interior start: pi at its prior mean, mu at 0, sigma at the prior
  // location.
  std::vector<double> initial_point() const override {
    std::vector<double> u(dim());
    for (std::size_t e = 0; e < n_entities(); ++e) {
      const double pm = pi_prior_mean_[role_of(e)];
      u[3 * e] = std::log(pm) - std::log1p(-pm);
      u[3 * e + 1] = 0.0;
      u[3 * e + 2] = std::log(priors_.sigma_mean);
    }
    return u;
  }

  // One replicated dataset from one reported (natural-space) draw; zeros
  // are exact 0.0.
  void replicate(std::span<const double> draw, Rng& rng,
                 std::span<double> out) const {
    if (draw.size() != dim() || out.size() != n_jobs())
      throw InvalidInput("replicate: dimension mismatch");
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      const std::size_t te = trans_entity_[j], re = rev_entity_[j];
      const double pi_j = 1.0 - (1.0 - draw[0]) * (1.0 - draw[3 * te]) *
                                    (1.0 - draw[3 * re]);
      if (rng.uniform() < pi_j) {
        out[j] = 0.0;
        continue;
      }
      const double mu_j = draw[1] + draw[3 * te + 1] + draw[3 * re + 1];
      const double var_j = draw[2] * draw[2] +
                           draw[3 * te + 2] * draw[3 * te + 2] +
                           draw[3 * re + 2] * draw[3 * re + 2];
      out[j] = std::exp(mu_j + std::sqrt(var_j) * sample_standard_normal(rng));
    }
  }

  // Collapsed per-job parameters for a full parameter struct.
  std::vector<CollapsedJobParams> job_params(const HurdleModelParams& p) const {
    const auto packed = pack(p);
    std::vector<CollapsedJobParams> out(n_jobs());
    for (std::size_t j = 0; j < n_jobs(); ++j) {
      out[j] = collapse(read_triple(packed, 0),
                        read_triple(packed, trans_entity_[j]),
                        read_triple(packed, rev_entity_[j]));
    }
    return out;
  }

 private:
  static double log_sigmoid(double t) {
    return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
  }

  // role: 0 = language, 1 = translator, 2 = reviewer
  std::size_t role_of(std::size_t entity) const {
    if (entity == 0) return 0;
    return entity <= n_translators() ? 1 : 2;
  }

  std::tuple<double, double, double> role_beta(std::size_t entity) const {
    switch (role_of(entity)) {
      case 0: return {priors_.pi_lang_a, priors_.pi_lang_b, beta_log_norm_[0]};
      case 1: return {priors_.pi_trans_a, priors_.pi_trans_b, beta_log_norm_[1]};
      default: return {priors_.pi_rev_a, priors_.pi_rev_b, beta_log_norm_[2]};
    }
  }

  static void write_triple(std::vector<double>& v, std::size_t e,
                           const HurdleFactorParams& f) {
    if (!(f.pi >= 0.0 && f.pi <= 1.0) || !(f.sigma > 0.0))
      throw InvalidInput("hurdle params: pi must be in [0,1], sigma > 0");
    v[3 * e] = f.pi;
    v[3 * e + 1] = f.mu;
    v[3 * e + 2] = f.sigma;
  }

  static HurdleFactorParams read_triple(std::span<const double> v, std::size_t e) {
    return {v[3 * e], v[3 * e + 1], v[3 * e + 2]};
  }

  void check_keys(const HurdleModelParams& p) const {
    if (p.translators.size() != translator_ids_.size() ||
        p.reviewers.size() != reviewer_ids_.size())
      throw InvalidInput("hurdle params: entity sets do not match the data");
    for (const auto& id : translator_ids_)
      if (!p.translators.count(id))
        throw InvalidInput("hurdle params: missing translator '" + id + "'");
    for (const auto& id : reviewer_ids_)
      if (!p.reviewers.count(id))
        throw InvalidInput("hurdle params: missing reviewer '" + id + "'");
  }

  HurdlePriors priors_;
  std::string language_;
  std::vector<std::string> translator_ids_;
  std::vector<std::string> reviewer_ids_;
  std::vector<std::string> job_ids_;
  std::vector<double> ept_, log_ept_;
  std::vector<char> is_zero_;
  std::vector<std::uint32_t> trans_entity_, rev_entity_;
  std::array<double, 3> pi_prior_mean_{};
  std::array<double, 3> beta_log_norm_{};
  double sigma_prior_log_mass_ = 0.0;
};

}  // namespace tqa
