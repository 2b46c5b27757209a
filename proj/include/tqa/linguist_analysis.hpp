#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tqa/csv.hpp"
#include "tqa/data_model.hpp"
#include "tqa/errors.hpp"
#include "tqa/inference.hpp"
#include "tqa/rng.hpp"
#include "tqa/stats.hpp"

namespace tqa {

enum class SkillLevel { L1, L2, Unknown };

inline SkillLevel parse_skill_level(std::string_view s) {
  if (s == "L1" || s == "l1") return SkillLevel::L1;
  if (s == "L2" || s == "l2") return SkillLevel::L2;
  if (s == "unknown" || s == "" || s == "Unknown") return SkillLevel::Unknown;
  throw InvalidInput("unknown skill level '" + std::string(s) + "'");
}

inline std::string_view skill_level_name(SkillLevel level) {
  switch (level) {
    case SkillLevel::L1: return "L1";
    case SkillLevel::L2: return "L2";
    default: return "unknown";
  }
}

struct LabelLoadResult {
  std::map<std::string, SkillLevel> labels;
  std::vector<std::string> skipped;  // label rows naming unknown linguists
};

// Labels CSV: columns linguist_id, level. Ids absent from `known` are
// reported as skipped, not errors.
inline LabelLoadResult load_labels(std::istream& in,
                                   const std::vector<std::string>& known) {
  const auto table = csv::read_table(in);
  const auto c_id = table.column("linguist_id");
  const auto c_level = table.column("level");
  LabelLoadResult out;
  for (const auto& row : table.rows) {
    const auto level = parse_skill_level(row[c_level]);
    if (std::find(known.begin(), known.end(), row[c_id]) == known.end()) {
      out.skipped.push_back(row[c_id]);
      continue;
    }
    out.labels[row[c_id]] = level;
  }
  return out;
}

enum class Role { Translator, Reviewer };

struct RoleSummary {
  double pi = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double pi_sd = std::numeric_limits<double>::quiet_NaN();
  double mu_sd = std::numeric_limits<double>::quiet_NaN();
  double sigma_sd = std::numeric_limits<double>::quiet_NaN();
  double mean_ept = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_jobs = 0;
};

struct LinguistSummary {
  std::string linguist_id;
  SkillLevel level = SkillLevel::Unknown;
  std::optional<RoleSummary> translator;
  std::optional<RoleSummary> reviewer;

  bool dual_role() const { return translator.has_value() && reviewer.has_value(); }
};

namespace detail {

struct WeightedTriple {
  double pi = 0, mu = 0, sigma = 0, pi_sd = 0, mu_sd = 0, sigma_sd = 0;
  double ept_sum = 0;
  std::size_t n_jobs = 0;
  double weight = 0;
};

inline void add_language_fit(WeightedTriple& acc, const ChainSet& fit,
                             const std::string& prefix, const std::string& id,
                             double ept_sum, std::size_t n_jobs) {
  const auto mean_sd = [&](const std::string& name) {
    const auto pooled = fit.pooled(fit.param_index(name));
    return std::pair<double, double>(mean(pooled),
                                     pooled.size() > 1 ? sample_sd(pooled) : 0.0);
  };
  const auto [pi_m, pi_s] = mean_sd("pi_" + prefix + "[" + id + "]");
  const auto [mu_m, mu_s] = mean_sd("mu_" + prefix + "[" + id + "]");
  const auto [sg_m, sg_s] = mean_sd("sigma_" + prefix + "[" + id + "]");
  const double w = static_cast<double>(n_jobs);
  acc.pi += w * pi_m;
  acc.mu += w * mu_m;
  acc.sigma += w * sg_m;
  acc.pi_sd += w * pi_s;
  acc.mu_sd += w * mu_s;
  acc.sigma_sd += w * sg_s;
  acc.ept_sum += ept_sum;
  acc.n_jobs += n_jobs;
  acc.weight += w;
}

inline std::optional<RoleSummary> finalize(const WeightedTriple& acc) {
  if (acc.weight == 0.0) return std::nullopt;
  RoleSummary s;
  s.pi = acc.pi / acc.weight;
  s.mu = acc.mu / acc.weight;
  s.sigma = acc.sigma / acc.weight;
  s.pi_sd = acc.pi_sd / acc.weight;
  s.mu_sd = acc.mu_sd / acc.weight;
  s.sigma_sd = acc.sigma_sd / acc.weight;
  s.mean_ept = acc.ept_sum / static_cast<double>(acc.n_jobs);
  s.n_jobs = acc.n_jobs;
  return s;
}

}  // namespace detail

// Per-linguist posterior means of the factor parameters, pooled across
// languages with job-count weights, plus the observed mean score per role.
inline std::vector<LinguistSummary> build_linguist_summaries(
    const Dataset& data, const std::map<std::string, ChainSet>& hurdle_fits,
    const std::map<std::string, SkillLevel>& labels) {
  // observed job counts and score sums per (linguist, role, language)
  struct Obs {
    double ept_sum = 0;
    std::size_t n = 0;
  };
  std::map<std::string, std::map<std::string, Obs>> trans_obs, rev_obs;
  for (const auto& r : data.records()) {
    auto& t = trans_obs[r.translator_id][r.language_pair];
    t.ept_sum += r.ept;
    t.n += 1;
    auto& v = rev_obs[r.reviewer_id][r.language_pair];
    v.ept_sum += r.ept;
    v.n += 1;
  }

  std::map<std::string, detail::WeightedTriple> trans_acc, rev_acc;
  for (const auto& [id, by_lang] : trans_obs) {
    for (const auto& [lang, obs] : by_lang) {
      const auto fit = hurdle_fits.find(lang);
      if (fit == hurdle_fits.end()) continue;
      if (!fit->second.has_param("pi_t[" + id + "]")) continue;
      detail::add_language_fit(trans_acc[id], fit->second, "t", id, obs.ept_sum,
                               obs.n);
    }
  }
  for (const auto& [id, by_lang] : rev_obs) {
    for (const auto& [lang, obs] : by_lang) {
      const auto fit = hurdle_fits.find(lang);
      if (fit == hurdle_fits.end()) continue;
      if (!fit->second.has_param("pi_r[" + id + "]")) continue;
      detail::add_language_fit(rev_acc[id], fit->second, "r", id, obs.ept_sum,
                               obs.n);
    }
  }

  std::map<std::string, LinguistSummary> by_id;
  for (const auto& [id, acc] : trans_acc) {
    auto& s = by_id[id];
    s.linguist_id = id;
    s.translator = detail::finalize(acc);
  }
  for (const auto& [id, acc] : rev_acc) {
    auto& s = by_id[id];
    s.linguist_id = id;
    s.reviewer = detail::finalize(acc);
  }
  std::vector<LinguistSummary> out;
  out.reserve(by_id.size());
  for (auto& [id, s] : by_id) {
    const auto label = labels.find(id);
    s.level = label == labels.end() ? SkillLevel::Unknown : label->second;
    out.push_back(std::move(s));
  }
  return out;
}

// Percentile bootstrap confidence interval of the mean.
inline std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                              double level, std::size_t n_boot,
                                              Rng& rng) {
  if (values.empty()) throw InsufficientData("bootstrap_ci: empty sample");
  if (!(level > 0.0 && level < 1.0))
    throw InvalidInput("bootstrap_ci: level must be in (0,1)");
  if (n_boot < 1) throw InvalidInput("bootstrap_ci: n_boot must be >= 1");
  const std::size_t n = values.size();
  std::vector<double> means(n_boot);
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.uniform_index(n)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  return {quantile_sorted(means, alpha), quantile_sorted(means, 1.0 - alpha)};
}

enum class Grouping { FourGroups, Aggregated };

struct GroupValueSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
};

struct GroupSummaryRow {
  std::string group;
  std::size_t n = 0;
  GroupValueSummary mean_ept, pi, mu, sigma;
};

namespace detail {

inline std::string group_key(const LinguistSummary& s, Grouping grouping) {
  if (grouping == Grouping::Aggregated)
    return s.level == SkillLevel::Unknown ? "unknown" : "skilled";
  switch (s.level) {
    case SkillLevel::L1: return "L1";
    case SkillLevel::L2: return "L2";
    default: return s.dual_role() ? "unknown_dual_role" : "unknown_single_role";
  }
}

inline std::vector<std::string> group_order(Grouping grouping) {
  if (grouping == Grouping::Aggregated) return {"skilled", "unknown"};
  return {"L1", "L2", "unknown_dual_role", "unknown_single_role"};
}

}  // namespace detail

// Group means with bootstrap confidence intervals for the observed score
// and the three factor parameters of one role. Empty groups are absent
// from the result.
inline std::vector<GroupSummaryRow> group_summary(
    std::span<const LinguistSummary> summaries, Role role, Grouping grouping,
    double level, std::size_t n_boot, Rng& rng) {
  std::map<std::string, std::vector<const LinguistSummary*>> groups;
  for (const auto& s : summaries) {
    const auto& rs = role == Role::Translator ? s.translator : s.reviewer;
    if (!rs) continue;
    groups[detail::group_key(s, grouping)].push_back(&s);
  }
  // stable member order makes the result independent of input permutation
  for (auto& [name, members] : groups)
    std::sort(members.begin(), members.end(),
              [](const LinguistSummary* a, const LinguistSummary* b) {
                return a->linguist_id < b->linguist_id;
              });

  std::vector<GroupSummaryRow> out;
  std::size_t group_index = 0;
  for (const auto& name : detail::group_order(grouping)) {
    const auto it = groups.find(name);
    ++group_index;
    if (it == groups.end()) continue;
    const auto& members = it->second;

    GroupSummaryRow row;
    row.group = name;
    row.n = members.size();

    std::size_t metric_index = 0;
    const auto metric = [&](auto getter) {
      std::vector<double> v;
      v.reserve(members.size());
      for (const auto* m : members) {
        const auto& rs = role == Role::Translator ? m->translator : m->reviewer;
        v.push_back(getter(*rs));
      }
      GroupValueSummary g;
      g.mean = mean(v);
      Rng boot_rng = rng.split(group_index * 8 + metric_index++);
      const auto ci = bootstrap_ci(v, level, n_boot, boot_rng);
      g.lo = ci.first;
      g.hi = ci.second;
      return g;
    };

    row.mean_ept = metric([](const RoleSummary& r) { return r.mean_ept; });
    row.pi = metric([](const RoleSummary& r) { return r.pi; });
    row.mu = metric([](const RoleSummary& r) { return r.mu; });
    row.sigma = metric([](const RoleSummary& r) { return r.sigma; });
    out.push_back(std::move(row));
  }
  return out;
}

struct CrossFeatureRow {
  std::string linguist_id;
  SkillLevel level = SkillLevel::Unknown;
  double mu_t = 0, mu_r = 0, sigma_t = 0, sigma_r = 0;
};

struct CrossCentroid {
  SkillLevel level = SkillLevel::Unknown;
  std::size_t n = 0;
  double mu_t = 0, mu_r = 0, sigma_t = 0, sigma_r = 0;
};

struct CrossFeatures {
  std::vector<CrossFeatureRow> rows;       // dual-role linguists only
  std::vector<CrossCentroid> centroids;    // unweighted per skill level
};

inline CrossFeatures cross_features(std::span<const LinguistSummary> summaries) {
  CrossFeatures out;
  std::map<SkillLevel, CrossCentroid> centroids;
  for (const auto& s : summaries) {
    if (!s.dual_role()) continue;
    CrossFeatureRow row;
    row.linguist_id = s.linguist_id;
    row.level = s.level;
    row.mu_t = s.translator->mu;
    row.mu_r = s.reviewer->mu;
    row.sigma_t = s.translator->sigma;
    row.sigma_r = s.reviewer->sigma;
    auto& c = centroids[s.level];
    c.level = s.level;
    c.n += 1;
    c.mu_t += row.mu_t;
    c.mu_r += row.mu_r;
    c.sigma_t += row.sigma_t;
    c.sigma_r += row.sigma_r;
    out.rows.push_back(std::move(row));
  }
  for (auto& [level, c] : centroids) {
    const double n = static_cast<double>(c.n);
    c.mu_t /= n;
    c.mu_r /= n;
    c.sigma_t /= n;
    c.sigma_r /= n;
    out.centroids.push_back(c);
  }
  return out;
}

// Spearman rank correlation between a recovered and a reference ranking
// over their common keys.
inline double skill_rank_recovery(const std::map<std::string, double>& recovered,
                                  const std::map<std::string, double>& truth) {
  std::vector<double> a, b;
  for (const auto& [key, value] : recovered) {
    const auto it = truth.find(key);
    if (it == truth.end()) continue;
    a.push_back(value);
    b.push_back(it->second);
  }
  if (a.size() < 3)
    throw InsufficientData("skill_rank_recovery: fewer than 3 common keys");
  return spearman(a, b);
}

}  // namespace tqa
