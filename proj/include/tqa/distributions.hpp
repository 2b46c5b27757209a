#pragma once

#include <cmath>
#include <limits>
#include <string_view>
#include <variant>
#include <vector>

#include "tqa/errors.hpp"
#include "tqa/rng.hpp"

namespace tqa {

inline constexpr double kLnSqrt2Pi = 0.91893853320467274178;  // ln sqrt(2*pi)
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

// log Phi(z), stable in the deep lower tail where erfc underflows.
inline double normal_logcdf(double z) {
  if (z > -8.0) return std::log(normal_cdf(z));
  const double z2 = z * z;
  return -0.5 * z2 - kLnSqrt2Pi - std::log(-z) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

inline double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLnSqrt2Pi;
}

// One standard normal variate (Marsaglia polar, no cached spare so the
// draw count per call is independent of call history).
inline double sample_standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    const double s = u * u + v * v;
    if (s >= 1.0 || s == 0.0) continue;
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

namespace detail {

// Marsaglia-Tsang, shape >= 1, unit scale.
inline double sample_gamma_shape_ge1(Rng& rng, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double z = sample_standard_normal(rng);
    const double t = 1.0 + c * z;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
  }
}

inline double sample_gamma(Rng& rng, double shape, double scale) {
  if (shape >= 1.0) return scale * sample_gamma_shape_ge1(rng, shape);
  // boost the shape by one and correct with a uniform power
  const double g = sample_gamma_shape_ge1(rng, shape + 1.0);
  return scale * g * std::pow(rng.uniform(), 1.0 / shape);
}

// Standard normal truncated to [alpha, +inf).
inline double sample_std_normal_lower_tail(Rng& rng, double alpha) {
  if (alpha < 0.5) {  // plain rejection accepts >= ~30% here
    for (;;) {
      const double z = sample_standard_normal(rng);
      if (z >= alpha) return z;
    }
  }
  // Robert's exponential rejection for far tails
  const double lambda = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
  for (;;) {
    const double z = alpha - std::log(rng.uniform()) / lambda;
    const double d = z - lambda;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

}  // namespace detail

struct Normal {
  double mu = 0.0;
  double sigma = 1.0;

  Normal(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
    if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
      throw InvalidInput("Normal: requires finite mu and sigma > 0");
  }

  double log_pdf(double x) const { return normal_log_pdf(x, mu, sigma); }
  double cdf(double x) const { return normal_cdf((x - mu) / sigma); }
  double sample(Rng& rng) const { return mu + sigma * sample_standard_normal(rng); }
};

// Normal truncated to [0, +inf); mu/sigma describe the untruncated curve
// and the normalising constant is part of the density.
struct TruncatedNormal {
  double mu = 0.0;
  double sigma = 1.0;

  TruncatedNormal(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
    if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
      throw InvalidInput("TruncatedNormal: requires finite mu and sigma > 0");
    log_mass_ = normal_logcdf(mu / sigma);  // P(X >= 0) = Phi(mu/sigma)
  }

  double log_pdf(double x) const {
    if (x < 0.0) return kNegInf;
    return normal_log_pdf(x, mu, sigma) - log_mass_;
  }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    const double lo = normal_cdf(-mu / sigma);
    return (normal_cdf((x - mu) / sigma) - lo) / (1.0 - lo);
  }

  double sample(Rng& rng) const {
    return mu + sigma * detail::sample_std_normal_lower_tail(rng, -mu / sigma);
  }

 private:
  double log_mass_ = 0.0;
};

struct HalfNormal {
  double sigma = 1.0;

  explicit HalfNormal(double sigma_) : sigma(sigma_) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw InvalidInput("HalfNormal: requires sigma > 0");
  }

  double log_pdf(double x) const {
    if (x < 0.0) return kNegInf;
    return M_LN2 + normal_log_pdf(x, 0.0, sigma);
  }

  double cdf(double x) const {
    return x <= 0.0 ? 0.0 : 2.0 * normal_cdf(x / sigma) - 1.0;
  }

  double sample(Rng& rng) const {
    return sigma * std::fabs(sample_standard_normal(rng));
  }
};

// Shape/scale parameterisation: Gamma(shape = 1, scale = 3) has mean 3.
struct Gamma {
  double shape = 1.0;
  double scale = 1.0;

  Gamma(double shape_, double scale_) : shape(shape_), scale(scale_) {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) ||
        !std::isfinite(scale))
      throw InvalidInput("Gamma: requires shape > 0 and scale > 0");
    log_norm_ = -std::lgamma(shape) - shape * std::log(scale);
  }

  double log_pdf(double x) const {
    if (x < 0.0) return kNegInf;
    if (x == 0.0) {
      if (shape > 1.0) return kNegInf;
      if (shape == 1.0) return -std::log(scale);
      return kPosInf;  // density diverges at 0 for shape < 1
    }
    return (shape - 1.0) * std::log(x) - x / scale + log_norm_;
  }

  double sample(Rng& rng) const { return detail::sample_gamma(rng, shape, scale); }

 private:
  double log_norm_ = 0.0;
};

struct Beta {
  double a = 1.0;
  double b = 1.0;

  Beta(double a_, double b_) : a(a_), b(b_) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw InvalidInput("Beta: requires both shapes > 0");
    log_norm_ = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  }

  double log_pdf(double x) const {
    if (x < 0.0 || x > 1.0) return kNegInf;
    if (x == 0.0) {
      if (a > 1.0) return kNegInf;
      if (a == 1.0) return log_norm_;
      return kPosInf;
    }
    if (x == 1.0) {
      if (b > 1.0) return kNegInf;
      if (b == 1.0) return log_norm_;
      return kPosInf;
    }
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + log_norm_;
  }

  double mean() const { return a / (a + b); }

  double sample(Rng& rng) const {
    const double x = detail::sample_gamma(rng, a, 1.0);
    const double y = detail::sample_gamma(rng, b, 1.0);
    return x / (x + y);
  }

 private:
  double log_norm_ = 0.0;
};

struct Lognormal {
  double mu = 0.0;
  double sigma = 1.0;

  Lognormal(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
    if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
      throw InvalidInput("Lognormal: requires finite mu and sigma > 0");
  }

  // -inf at x = 0; the hurdle wrapper owns the atom.
  double log_pdf(double x) const {
    if (x <= 0.0) return kNegInf;
    const double lx = std::log(x);
    const double z = (lx - mu) / sigma;
    return -lx - std::log(sigma) - kLnSqrt2Pi - 0.5 * z * z;
  }

  double cdf(double x) const {
    return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - mu) / sigma);
  }

  double sample(Rng& rng) const {
    return std::exp(mu + sigma * sample_standard_normal(rng));
  }
};

struct HurdleLognormalParams {
  double pi = 0.0;     // probability of the exact-zero atom
  double mu = 0.0;     // log-scale location of the positive part
  double sigma = 1.0;  // log-scale scale of the positive part
};

// Point mass at zero with probability pi, Lognormal(mu, sigma^2) above it.
struct HurdleLognormal {
  double pi = 0.0;
  double mu = 0.0;
  double sigma = 1.0;

  HurdleLognormal(double pi_, double mu_, double sigma_)
      : pi(pi_), mu(mu_), sigma(sigma_) {
    if (!(pi >= 0.0 && pi <= 1.0) || !(sigma > 0.0) || !std::isfinite(mu) ||
        !std::isfinite(sigma))
      throw InvalidInput("HurdleLognormal: requires pi in [0,1], sigma > 0");
  }

  explicit HurdleLognormal(const HurdleLognormalParams& p)
      : HurdleLognormal(p.pi, p.mu, p.sigma) {}

  double log_pdf(double x) const {
    if (x < 0.0) throw InvalidInput("HurdleLognormal: x must be >= 0");
    if (x == 0.0) return std::log(pi);
    return std::log1p(-pi) + Lognormal(mu, sigma).log_pdf(x);
  }

  // Mixed CDF with a jump of size pi at zero.
  double cdf(double x) const {
    if (x < 0.0) return 0.0;
    return pi + (1.0 - pi) * Lognormal(mu, sigma).cdf(x);
  }

  double sample(Rng& rng) const {
    if (rng.uniform() < pi) return 0.0;
    return std::exp(mu + sigma * sample_standard_normal(rng));
  }
};

using Distribution = std::variant<Normal, TruncatedNormal, HalfNormal, Gamma,
                                  Beta, Lognormal, HurdleLognormal>;

inline double log_pdf(const Distribution& d, double x) {
  return std::visit([x](const auto& f) { return f.log_pdf(x); }, d);
}

inline double sample(const Distribution& d, Rng& rng) {
  return std::visit([&rng](const auto& f) { return f.sample(rng); }, d);
}

inline std::vector<double> sample_n(const Distribution& d, std::size_t n,
                                    Rng& rng) {
  std::vector<double> out(n);
  for (auto& v : out) v = sample(d, rng);
  return out;
}

inline std::string_view family_name(const Distribution& d) {
  struct Visitor {
    std::string_view operator()(const Normal&) const { return "normal"; }
    std::string_view operator()(const TruncatedNormal&) const {
      return "truncated_normal";
    }
    std::string_view operator()(const HalfNormal&) const { return "half_normal"; }
    std::string_view operator()(const Gamma&) const { return "gamma"; }
    std::string_view operator()(const Beta&) const { return "beta"; }
    std::string_view operator()(const Lognormal&) const { return "lognormal"; }
    std::string_view operator()(const HurdleLognormal&) const {
      return "hurdle_lognormal";
    }
  };
  return std::visit(Visitor{}, d);
}

}  // namespace tqa
