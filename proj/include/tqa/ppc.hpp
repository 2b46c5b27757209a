#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tqa/errors.hpp"
#include "tqa/inference.hpp"
#include "tqa/model_gaussian.hpp"
#include "tqa/model_hurdle.hpp"
#include "tqa/rng.hpp"
#include "tqa/stats.hpp"

namespace tqa {

// Replicated score matrix for one language slice: one row per replication,
// one column per job, replication r drawn under posterior draw
// floor(r * n_draws / n_reps) (cycling when fewer draws than replications).
struct ReplicationSet {
  std::size_t n_reps = 0;
  std::size_t n_jobs = 0;
  std::vector<double> values;  // [rep][job]

  std::span<const double> rep(std::size_t r) const {
    return {values.data() + r * n_jobs, n_jobs};
  }

  double zero_fraction(std::size_t r) const {
    std::size_t z = 0;
    for (double v : rep(r)) z += (v == 0.0) ? 1 : 0;
    return static_cast<double>(z) / static_cast<double>(n_jobs);
  }

  double pooled_zero_fraction() const {
    std::size_t z = 0;
    for (double v : values) z += (v == 0.0) ? 1 : 0;
    return static_cast<double>(z) / static_cast<double>(values.size());
  }

  double negative_fraction() const {
    std::size_t neg = 0;
    for (double v : values) neg += (v < 0.0) ? 1 : 0;
    return static_cast<double>(neg) / static_cast<double>(values.size());
  }
};

namespace detail {

template <class Model>
ReplicationSet replicate_model(const Model& model, const ChainSet& draws,
                               std::size_t n_reps, Rng& rng) {
  if (n_reps < 1) throw InvalidInput("replications: need at least 1");
  if (draws.total_draws() == 0) throw InvalidInput("replications: empty chain set");
  ReplicationSet out;
  out.n_reps = n_reps;
  out.n_jobs = model.n_jobs();
  out.values.resize(n_reps * out.n_jobs);
  const std::size_t total = draws.total_draws();
  for (std::size_t r = 0; r < n_reps; ++r) {
    const std::size_t idx =
        n_reps <= total ? (r * total) / n_reps : r % total;
    Rng rep_rng = rng.split(r);
    std::span<double> row{out.values.data() + r * out.n_jobs, out.n_jobs};
    model.replicate(draws.flat_draw(idx), rep_rng, row);
  }
  return out;
}

}  // namespace detail

inline ReplicationSet gaussian_posterior_predictive(const GaussianModel& model,
                                                    const ChainSet& draws,
                                                    std::size_t n_reps, Rng& rng) {
  return detail::replicate_model(model, draws, n_reps, rng);
}

inline ReplicationSet hurdle_posterior_predictive(const HurdleModel& model,
                                                  const ChainSet& draws,
                                                  std::size_t n_reps, Rng& rng) {
  return detail::replicate_model(model, draws, n_reps, rng);
}

// Mean absolute replication error of the share of perfect scores. A value
// counts as zero only when it is exactly 0.0.
inline double mae_zero_ratio(const ReplicationSet& reps,
                             std::span<const double> observed) {
  if (reps.n_reps == 0) throw InsufficientData("mae_zero_ratio: no replications");
  if (observed.empty()) throw InsufficientData("mae_zero_ratio: empty slice");
  if (observed.size() != reps.n_jobs)
    throw InvalidInput("mae_zero_ratio: job count mismatch");
  std::size_t z = 0;
  for (double v : observed) z += (v == 0.0) ? 1 : 0;
  const double observed_ratio =
      static_cast<double>(z) / static_cast<double>(observed.size());
  double mae = 0.0;
  for (std::size_t r = 0; r < reps.n_reps; ++r)
    mae += std::fabs(reps.zero_fraction(r) - observed_ratio);
  return mae / static_cast<double>(reps.n_reps);
}

struct KlBinning {
  int n_positive_bins = 50;
  double epsilon = 1e-9;  // additive probability mass per bin
};

struct SharedHistogram {
  double bin_width = 0.0;
  double max_value = 0.0;
  // index 0 is the exact-zero atom; 1..n are the positive bins
  std::vector<double> p_mass, q_mass;
};

// Histogram over a zero atom plus equal-width bins spanning (0, max of
// both samples]. Values outside the bins (negatives) still count in the
// denominator, so a model that wastes mass below zero pays for it.
inline SharedHistogram shared_histogram(std::span<const double> p_sample,
                                        std::span<const double> q_sample,
                                        const KlBinning& binning = {}) {
  if (p_sample.empty() || q_sample.empty())
    throw InsufficientData("histogram: empty sample");
  if (binning.n_positive_bins < 1)
    throw InvalidInput("histogram: need at least one positive bin");

  double max_value = 0.0;
  bool any_zero = false;
  for (const auto sample : {p_sample, q_sample})
    for (double v : sample) {
      max_value = std::max(max_value, v);
      any_zero = any_zero || v == 0.0;
    }
  if (max_value <= 0.0 && !any_zero)
    throw InvalidInput("histogram: degenerate binning, no mass at or above 0");

  SharedHistogram h;
  h.max_value = max_value;
  const auto nb = static_cast<std::size_t>(binning.n_positive_bins);
  h.bin_width = max_value > 0.0 ? max_value / static_cast<double>(nb) : 1.0;
  h.p_mass.assign(nb + 1, 0.0);
  h.q_mass.assign(nb + 1, 0.0);

  auto fill = [&](std::span<const double> sample, std::vector<double>& mass) {
    for (double v : sample) {
      if (v == 0.0) {
        mass[0] += 1.0;
      } else if (v > 0.0) {
        auto b = static_cast<std::size_t>(v / h.bin_width);
        if (b >= nb) b = nb - 1;
        mass[b + 1] += 1.0;
      }
      // negatives fall outside every bin but stay in the denominator
    }
    const double n = static_cast<double>(sample.size());
    for (auto& m : mass) m /= n;
  };
  fill(p_sample, h.p_mass);
  fill(q_sample, h.q_mass);
  return h;
}

// Empirical KL divergence sum p ln(p/q) >= 0 over the shared histogram,
// with epsilon smoothing and renormalisation keeping it finite.
inline double empirical_kl(std::span<const double> p_sample,
                           std::span<const double> q_sample,
                           const KlBinning& binning = {}) {
  const auto h = shared_histogram(p_sample, q_sample, binning);
  double p_total = 0.0, q_total = 0.0;
  for (std::size_t i = 0; i < h.p_mass.size(); ++i) {
    p_total += h.p_mass[i] + binning.epsilon;
    q_total += h.q_mass[i] + binning.epsilon;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < h.p_mass.size(); ++i) {
    const double p = (h.p_mass[i] + binning.epsilon) / p_total;
    const double q = (h.q_mass[i] + binning.epsilon) / q_total;
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

struct ModelPpcMetrics {
  bool present = false;
  double mae_zero_ratio = std::numeric_limits<double>::quiet_NaN();
  double kl_pooled = std::numeric_limits<double>::quiet_NaN();
  double kl_per_rep_mean = std::numeric_limits<double>::quiet_NaN();
  double replicate_median = std::numeric_limits<double>::quiet_NaN();
  double zero_fraction = std::numeric_limits<double>::quiet_NaN();
  double negative_fraction = std::numeric_limits<double>::quiet_NaN();
};

struct PpcLanguageReport {
  std::string language;
  std::size_t n_jobs = 0;
  std::size_t n_reps = 0;
  int n_positive_bins = 0;
  double smoothing_epsilon = 0.0;
  double observed_zero_fraction = 0.0;
  double observed_median = 0.0;
  ModelPpcMetrics gaussian;
  ModelPpcMetrics hurdle;
  // < 1 where the hurdle replicates track the observation more closely
  double kl_ratio = std::numeric_limits<double>::quiet_NaN();
  double kl_ratio_per_rep_mean = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline ModelPpcMetrics model_metrics(std::span<const double> observed,
                                     const ReplicationSet& reps,
                                     const KlBinning& binning) {
  ModelPpcMetrics m;
  m.present = true;
  m.mae_zero_ratio = mae_zero_ratio(reps, observed);
  m.kl_pooled = empirical_kl(observed, reps.values, binning);
  double sum = 0.0;
  for (std::size_t r = 0; r < reps.n_reps; ++r)
    sum += empirical_kl(observed, reps.rep(r), binning);
  m.kl_per_rep_mean = sum / static_cast<double>(reps.n_reps);
  std::vector<double> pooled(reps.values);
  m.replicate_median = median(std::move(pooled));
  m.zero_fraction = reps.pooled_zero_fraction();
  m.negative_fraction = reps.negative_fraction();
  return m;
}

}  // namespace detail

// PPC metrics for one language; either replication set may be missing and
// its metrics (and the ratio) stay unset.
inline PpcLanguageReport kl_ratio_report(std::string language,
                                         std::span<const double> observed,
                                         const ReplicationSet* gaussian_reps,
                                         const ReplicationSet* hurdle_reps,
                                         const KlBinning& binning = {}) {
  if (observed.empty()) throw InsufficientData("ppc report: empty slice");
  PpcLanguageReport rep;
  rep.language = std::move(language);
  rep.n_jobs = observed.size();
  rep.n_positive_bins = binning.n_positive_bins;
  rep.smoothing_epsilon = binning.epsilon;
  std::size_t z = 0;
  for (double v : observed) z += (v == 0.0) ? 1 : 0;
  rep.observed_zero_fraction =
      static_cast<double>(z) / static_cast<double>(observed.size());
  rep.observed_median = median(std::vector<double>(observed.begin(), observed.end()));

  if (gaussian_reps != nullptr) {
    rep.gaussian = detail::model_metrics(observed, *gaussian_reps, binning);
    rep.n_reps = gaussian_reps->n_reps;
  }
  if (hurdle_reps != nullptr) {
    rep.hurdle = detail::model_metrics(observed, *hurdle_reps, binning);
    rep.n_reps = hurdle_reps->n_reps;
  }
  if (gaussian_reps != nullptr && hurdle_reps != nullptr) {
    rep.kl_ratio = rep.hurdle.kl_pooled / rep.gaussian.kl_pooled;
    rep.kl_ratio_per_rep_mean =
        rep.hurdle.kl_per_rep_mean / rep.gaussian.kl_per_rep_mean;
  }
  return rep;
}

}  // namespace tqa
