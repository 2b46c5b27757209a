#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tqa/data_model.hpp"
#include "tqa/distributions.hpp"
#include "tqa/inference.hpp"
#include "tqa/model_hurdle.hpp"
#include "tqa/rng.hpp"
#include "tqa/stats.hpp"

namespace tqa {

// True-parameter design of the skill groups. Translator locations are
// drawn around a per-group offset; reviewer consistency is drawn around a
// per-group level so the skilled groups are more consistent by design.
struct SkillGroupDesign {
  double frac_l1 = 0.2;
  double frac_l2 = 0.2;
  double frac_unknown = 0.6;
  double mu_t_offset_l1 = -0.5;
  double mu_t_offset_l2 = -0.25;
  double mu_t_offset_unknown = 0.0;
  double mu_t_sd = 0.4;
  double sigma_r_skilled_mean = 0.30;
  double sigma_r_unknown_mean = 0.55;
  double sigma_r_sd = 0.08;
  double sigma_t_mean = 0.40;
  double sigma_t_sd = 0.12;
  double sigma_l_mean = 0.40;
  double sigma_l_sd = 0.12;
};

// Fixed values used instead of prior draws when params_from_priors is off.
struct ExplicitWorldParams {
  double pi_lang = 0.1;
  double pi_trans = 0.1;
  double pi_rev = 0.1;
  double mu_lang = 0.0;
  double mu_rev = 0.0;
};

struct WorldConfig {
  int n_languages = 3;
  int n_translators = 30;  // per language
  int n_reviewers = 10;    // per language
  int n_jobs = 2000;       // per language
  std::uint64_t seed = 1;
  std::string generative_model = "hurdle";  // "hurdle" | "gaussian"
  // zero probabilities and non-designed locations drawn from the model
  // priors (true) or pinned to explicit_params (false)
  bool params_from_priors = true;
  double dual_role_fraction = 0.5;  // reviewers who also translate
  bool quantized_ept = false;  // main dataset carries back-solved counts
  SkillGroupDesign skills;
  ExplicitWorldParams explicit_params;
  HurdlePriors priors;

  void validate() const {
    if (n_languages < 1 || n_translators < 1 || n_reviewers < 1 || n_jobs < 1)
      throw InvalidInput("world config: counts must be >= 1");
    if (generative_model != "hurdle" && generative_model != "gaussian")
      throw InvalidInput("world config: generative_model must be hurdle|gaussian");
    const double sum = skills.frac_l1 + skills.frac_l2 + skills.frac_unknown;
    if (skills.frac_l1 < 0 || skills.frac_l2 < 0 || skills.frac_unknown < 0 ||
        std::fabs(sum - 1.0) > 1e-9)
      throw InvalidInput(
          "world config: skill_groups fractions (frac_l1, frac_l2, "
          "frac_unknown) must be non-negative and sum to 1");
    if (!(dual_role_fraction >= 0.0 && dual_role_fraction <= 1.0))
      throw InvalidInput("world config: dual_role_fraction must be in [0,1]");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n_languages"] = n_languages;
    j["n_translators"] = n_translators;
    j["n_reviewers"] = n_reviewers;
    j["n_jobs"] = n_jobs;
    j["seed"] = seed;
    j["generative_model"] = generative_model;
    j["params_from_priors"] = params_from_priors;
    j["dual_role_fraction"] = dual_role_fraction;
    j["quantized_ept"] = quantized_ept;
    j["skill_groups"] = {{"frac_l1", skills.frac_l1},
                         {"frac_l2", skills.frac_l2},
                         {"frac_unknown", skills.frac_unknown},
                         {"mu_t_offset_l1", skills.mu_t_offset_l1},
                         {"mu_t_offset_l2", skills.mu_t_offset_l2},
                         {"mu_t_offset_unknown", skills.mu_t_offset_unknown},
                         {"mu_t_sd", skills.mu_t_sd},
                         {"sigma_r_skilled_mean", skills.sigma_r_skilled_mean},
                         {"sigma_r_unknown_mean", skills.sigma_r_unknown_mean},
                         {"sigma_r_sd", skills.sigma_r_sd},
                         {"sigma_t_mean", skills.sigma_t_mean},
                         {"sigma_t_sd", skills.sigma_t_sd},
                         {"sigma_l_mean", skills.sigma_l_mean},
                         {"sigma_l_sd", skills.sigma_l_sd}};
    j["explicit_params"] = {{"pi_lang", explicit_params.pi_lang},
                            {"pi_trans", explicit_params.pi_trans},
                            {"pi_rev", explicit_params.pi_rev},
                            {"mu_lang", explicit_params.mu_lang},
                            {"mu_rev", explicit_params.mu_rev}};
    j["priors"] = {{"pi_lang_a", priors.pi_lang_a},
                   {"pi_lang_b", priors.pi_lang_b},
                   {"pi_trans_a", priors.pi_trans_a},
                   {"pi_trans_b", priors.pi_trans_b},
                   {"pi_rev_a", priors.pi_rev_a},
                   {"pi_rev_b", priors.pi_rev_b},
                   {"mu_sd", priors.mu_sd},
                   {"sigma_mean", priors.sigma_mean},
                   {"sigma_sd", priors.sigma_sd}};
    return j;
  }

  static WorldConfig from_json(const nlohmann::json& j) {
    WorldConfig c;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_languages", c.n_languages);
    get("n_translators", c.n_translators);
    get("n_reviewers", c.n_reviewers);
    get("n_jobs", c.n_jobs);
    get("seed", c.seed);
    get("generative_model", c.generative_model);
    get("params_from_priors", c.params_from_priors);
    get("dual_role_fraction", c.dual_role_fraction);
    get("quantized_ept", c.quantized_ept);
    if (j.contains("skill_groups")) {
      const auto& s = j.at("skill_groups");
      auto gets = [&](const char* key, double& field) {
        if (s.contains(key)) field = s.at(key).get<double>();
      };
      gets("frac_l1", c.skills.frac_l1);
      gets("frac_l2", c.skills.frac_l2);
      gets("frac_unknown", c.skills.frac_unknown);
      gets("mu_t_offset_l1", c.skills.mu_t_offset_l1);
      gets("mu_t_offset_l2", c.skills.mu_t_offset_l2);
      gets("mu_t_offset_unknown", c.skills.mu_t_offset_unknown);
      gets("mu_t_sd", c.skills.mu_t_sd);
      gets("sigma_r_skilled_mean", c.skills.sigma_r_skilled_mean);
      gets("sigma_r_unknown_mean", c.skills.sigma_r_unknown_mean);
      gets("sigma_r_sd", c.skills.sigma_r_sd);
      gets("sigma_t_mean", c.skills.sigma_t_mean);
      gets("sigma_t_sd", c.skills.sigma_t_sd);
      gets("sigma_l_mean", c.skills.sigma_l_mean);
      gets("sigma_l_sd", c.skills.sigma_l_sd);
    }
    if (j.contains("explicit_params")) {
      const auto& s = j.at("explicit_params");
      auto gete = [&](const char* key, double& field) {
        if (s.contains(key)) field = s.at(key).get<double>();
      };
      gete("pi_lang", c.explicit_params.pi_lang);
      gete("pi_trans", c.explicit_params.pi_trans);
      gete("pi_rev", c.explicit_params.pi_rev);
      gete("mu_lang", c.explicit_params.mu_lang);
      gete("mu_rev", c.explicit_params.mu_rev);
    }
    if (j.contains("priors")) {
      const auto& s = j.at("priors");
      auto getp = [&](const char* key, double& field) {
        if (s.contains(key)) field = s.at(key).get<double>();
      };
      getp("pi_lang_a", c.priors.pi_lang_a);
      getp("pi_lang_b", c.priors.pi_lang_b);
      getp("pi_trans_a", c.priors.pi_trans_a);
      getp("pi_trans_b", c.priors.pi_trans_b);
      getp("pi_rev_a", c.priors.pi_rev_a);
      getp("pi_rev_b", c.priors.pi_rev_b);
      getp("mu_sd", c.priors.mu_sd);
      getp("sigma_mean", c.priors.sigma_mean);
      getp("sigma_sd", c.priors.sigma_sd);
    }
    c.validate();
    return c;
  }
};

struct EntityTruth {
  std::string id;
  std::string level;  // "L1" | "L2" | "unknown"
  HurdleFactorParams params;
};

struct LanguageTruth {
  std::string language;
  HurdleFactorParams language_params;
  std::vector<EntityTruth> translators;
  std::vector<EntityTruth> reviewers;
  // gaussian worlds: per-reviewer additive offset/noise truth
  std::vector<double> gauss_beta, gauss_sigma;
};

struct WorldTruth {
  WorldConfig config;
  std::vector<LanguageTruth> languages;
  Dataset dataset;            // continuous scores (no annotation back-solve)
  Dataset dataset_quantized;  // integer annotations and the quantized score
  std::vector<double> true_quality;  // per record: realised latent quality

  std::map<std::string, std::string> labels() const {
    std::map<std::string, std::string> out;
    for (const auto& lang : languages) {
      for (const auto& t : lang.translators) out[t.id] = t.level;
      for (const auto& r : lang.reviewers) out[r.id] = r.level;
    }
    return out;
  }

  void save(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "dataset.csv");
      (config.quantized_ept ? dataset_quantized : dataset).save_csv(out);
    }
    {
      std::ofstream out(dir / "dataset_quantized.csv");
      dataset_quantized.save_csv(out);
    }
    {
      std::ofstream out(dir / "truth.csv");
      csv::Writer w(out);
      w.row({"language", "entity_id", "role", "level", "pi", "mu", "sigma"});
      for (const auto& lang : languages) {
        w.row({lang.language, lang.language, "language", "",
               csv::format_double(lang.language_params.pi),
               csv::format_double(lang.language_params.mu),
               csv::format_double(lang.language_params.sigma)});
        for (const auto& t : lang.translators)
          w.row({lang.language, t.id, "translator", t.level,
                 csv::format_double(t.params.pi), csv::format_double(t.params.mu),
                 csv::format_double(t.params.sigma)});
        for (const auto& r : lang.reviewers)
          w.row({lang.language, r.id, "reviewer", r.level,
                 csv::format_double(r.params.pi), csv::format_double(r.params.mu),
                 csv::format_double(r.params.sigma)});
      }
    }
    {
      std::ofstream out(dir / "truth_jobs.csv");
      csv::Writer w(out);
      w.row({"job_id", "true_quality", "ept"});
      const auto& recs = dataset.records();
      for (std::size_t i = 0; i < recs.size(); ++i)
        w.row({recs[i].job_id, csv::format_double(true_quality[i]),
               csv::format_double(recs[i].ept)});
    }
    {
      std::ofstream out(dir / "labels.csv");
      csv::Writer w(out);
      w.row({"linguist_id", "level"});
      for (const auto& [id, level] : labels()) w.row({id, level});
    }
    {
      std::ofstream out(dir / "config.json");
      out << config.to_json().dump(2) << '\n';
    }
  }
};

namespace detail {

inline std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline std::string level_of_index(std::size_t i, std::size_t n,
                                  const SkillGroupDesign& s) {
  const auto n_l1 = static_cast<std::size_t>(std::lround(s.frac_l1 * static_cast<double>(n)));
  const auto n_l2 = static_cast<std::size_t>(std::lround(s.frac_l2 * static_cast<double>(n)));
  if (i < n_l1) return "L1";
  if (i < n_l1 + n_l2) return "L2";
  return "unknown";
}

inline double mu_t_offset(const std::string& level, const SkillGroupDesign& s) {
  if (level == "L1") return s.mu_t_offset_l1;
  if (level == "L2") return s.mu_t_offset_l2;
  return s.mu_t_offset_unknown;
}

}  // namespace detail

// Draw true parameters, assign jobs, and sample one synthetic dataset.
// Deterministic given (config, rng stream).
inline WorldTruth generate_world(const WorldConfig& config, Rng& rng) {
  config.validate();
  const auto& sk = config.skills;

  WorldTruth world;
  world.config = config;

  std::vector<ReviewRecord> records, records_q;
  const bool hurdle_world = config.generative_model == "hurdle";

  for (int li = 0; li < config.n_languages; ++li) {
    Rng lang_rng = rng.split(static_cast<std::uint64_t>(li));
    Rng truth_rng = lang_rng.split(0);
    Rng assign_rng = lang_rng.split(1);
    Rng noise_rng = lang_rng.split(2);

    LanguageTruth lang;
    lang.language = "lang_" + detail::zero_pad(static_cast<std::size_t>(li), 2);

    const Beta pi_lang_prior(config.priors.pi_lang_a, config.priors.pi_lang_b);
    const Beta pi_trans_prior(config.priors.pi_trans_a, config.priors.pi_trans_b);
    const Beta pi_rev_prior(config.priors.pi_rev_a, config.priors.pi_rev_b);
    const Normal mu_prior(0.0, config.priors.mu_sd);

    // language factor
    lang.language_params.pi = config.params_from_priors
                                  ? pi_lang_prior.sample(truth_rng)
                                  : config.explicit_params.pi_lang;
    lang.language_params.mu = config.params_from_priors
                                  ? mu_prior.sample(truth_rng)
                                  : config.explicit_params.mu_lang;
    lang.language_params.sigma =
        TruncatedNormal(sk.sigma_l_mean, sk.sigma_l_sd).sample(truth_rng);

    // translators: skill-designed locations
    const auto n_t = static_cast<std::size_t>(config.n_translators);
    for (std::size_t i = 0; i < n_t; ++i) {
      EntityTruth t;
      t.id = lang.language + "_t" + detail::zero_pad(i, 3);
      t.level = detail::level_of_index(i, n_t, sk);
      t.params.pi = config.params_from_priors ? pi_trans_prior.sample(truth_rng)
                                              : config.explicit_params.pi_trans;
      t.params.mu = detail::mu_t_offset(t.level, sk) +
                    sk.mu_t_sd * sample_standard_normal(truth_rng);
      t.params.sigma =
          TruncatedNormal(sk.sigma_t_mean, sk.sigma_t_sd).sample(truth_rng);
      lang.translators.push_back(std::move(t));
    }

    // reviewers: a strided share of them are the same linguists as the
    // translators; consistency is designed per skill group
    const auto n_r = static_cast<std::size_t>(config.n_reviewers);
    const auto n_dual = static_cast<std::size_t>(
        std::lround(config.dual_role_fraction * static_cast<double>(n_r)));
    if (n_t == 1 && n_dual == n_r)
      throw InvalidInput(
          "world config: infeasible — every reviewer would be the sole "
          "translator");
    std::vector<std::size_t> dual_translator(n_r, n_t);  // n_t = not dual
    for (std::size_t k = 0; k < n_dual && n_t > 0; ++k)
      dual_translator[k] = (k * n_t) / std::max<std::size_t>(n_dual, 1);
    for (std::size_t k = 0; k < n_r; ++k) {
      EntityTruth r;
      if (dual_translator[k] < n_t) {
        r.id = lang.translators[dual_translator[k]].id;
        r.level = lang.translators[dual_translator[k]].level;
      } else {
        r.id = lang.language + "_r" + detail::zero_pad(k, 3);
        r.level = detail::level_of_index(k, n_r, sk);
      }
      const bool skilled = r.level == "L1" || r.level == "L2";
      r.params.pi = config.params_from_priors ? pi_rev_prior.sample(truth_rng)
                                              : config.explicit_params.pi_rev;
      r.params.mu = config.params_from_priors ? mu_prior.sample(truth_rng)
                                              : config.explicit_params.mu_rev;
      r.params.sigma =
          TruncatedNormal(skilled ? sk.sigma_r_skilled_mean : sk.sigma_r_unknown_mean,
                          sk.sigma_r_sd)
              .sample(truth_rng);
      lang.reviewers.push_back(std::move(r));
    }

    // gaussian worlds keep additive reviewer truth
    if (!hurdle_world) {
      for (std::size_t k = 0; k < n_r; ++k) {
        lang.gauss_beta.push_back(0.5 * sample_standard_normal(truth_rng));
        lang.gauss_sigma.push_back(TruncatedNormal(0.5, 0.5).sample(truth_rng));
      }
    }

    // jobs: uniform (translator, reviewer) pairs over distinct linguists
    for (int n = 0; n < config.n_jobs; ++n) {
      const auto t = static_cast<std::size_t>(assign_rng.uniform_index(n_t));
      std::size_t r = 0;
      do {
        r = static_cast<std::size_t>(assign_rng.uniform_index(n_r));
      } while (dual_translator[r] == t);

      ReviewRecord rec;
      rec.job_id = lang.language + "_j" + detail::zero_pad(static_cast<std::size_t>(n), 6);
      rec.language_pair = lang.language;
      rec.translator_id = lang.translators[t].id;
      rec.reviewer_id = lang.reviewers[r].id;
      rec.word_count = 300 + static_cast<std::int64_t>(noise_rng.uniform_index(3201));

      double quality = 0.0, score = 0.0;
      if (hurdle_world) {
        const auto& fl = lang.language_params;
        const auto& ft = lang.translators[t].params;
        const auto& fr = lang.reviewers[r].params;
        const double d = HurdleLognormal(fl.pi, fl.mu, fl.sigma).sample(noise_rng);
        const double eps = HurdleLognormal(ft.pi, ft.mu, ft.sigma).sample(noise_rng);
        const double beta = HurdleLognormal(fr.pi, fr.mu, fr.sigma).sample(noise_rng);
        quality = d * eps;
        score = quality * beta;
      } else {
        quality = Gamma(1.0, 3.0).sample(noise_rng);
        score = quality + lang.gauss_beta[r] +
                lang.gauss_sigma[r] * sample_standard_normal(noise_rng);
        // a dataset score cannot be negative; the additive world clips
        score = std::max(score, 0.0);
      }

      rec.ept = score;
      world.true_quality.push_back(quality);

      // back-solved integer annotations: weight = minor + 2*major
      ReviewRecord rec_q = rec;
      const auto weight = static_cast<std::int64_t>(
          std::llround(score * static_cast<double>(rec.word_count) / 1000.0));
      ErrorAnnotationCounts counts;
      counts.n_major = weight / 2;
      counts.n_minor = weight % 2;
      rec_q.annotations = counts;
      rec_q.ept = compute_ept(counts, rec_q.word_count);

      records.push_back(std::move(rec));
      records_q.push_back(std::move(rec_q));
    }

    world.languages.push_back(std::move(lang));
  }

  world.dataset = Dataset::from_records(std::move(records));
  world.dataset_quantized = Dataset::from_records(std::move(records_q));
  return world;
}

// ---- parameter recovery ----

struct RecoveryClassReport {
  std::string language;     // "pooled" rows aggregate every language
  std::string param_class;  // e.g. "mu_t", "sigma_r", "q"
  std::size_t n = 0;
  bool spearman_defined = false;
  double spearman = std::numeric_limits<double>::quiet_NaN();
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct RecoveryAccumulator {
  std::vector<double> truth, post_mean;
  std::size_t covered = 0;
  double sq_err = 0.0;

  void add(double true_value, const std::vector<double>& draws_sorted,
           double mean_value) {
    truth.push_back(true_value);
    post_mean.push_back(mean_value);
    const double lo = quantile_sorted(draws_sorted, 0.025);
    const double hi = quantile_sorted(draws_sorted, 0.975);
    if (true_value >= lo && true_value <= hi) ++covered;
    sq_err += (mean_value - true_value) * (mean_value - true_value);
  }

  RecoveryClassReport report(std::string language, std::string param_class) const {
    RecoveryClassReport r;
    r.language = std::move(language);
    r.param_class = std::move(param_class);
    r.n = truth.size();
    if (r.n == 0) return r;
    r.coverage = static_cast<double>(covered) / static_cast<double>(r.n);
    r.rmse = std::sqrt(sq_err / static_cast<double>(r.n));
    if (r.n >= 3) {
      try {
        r.spearman = spearman(truth, post_mean);
        r.spearman_defined = true;
      } catch (const InsufficientData&) {
        // all ranks tied; not applicable
      }
    }
    return r;
  }
};

inline void accumulate_entity(RecoveryAccumulator& acc, const ChainSet& fit,
                              const std::string& param_name, double true_value) {
  const std::size_t p = fit.param_index(param_name);
  auto draws = fit.pooled(p);
  const double mean_value = mean(draws);
  std::sort(draws.begin(), draws.end());
  acc.add(true_value, draws, mean_value);
}

}  // namespace detail

// Recovery metrics of per-language hurdle fits against the generating
// truth: Spearman rank correlation of posterior means, central-interval
// coverage, and RMSE, per parameter class.
inline std::vector<RecoveryClassReport> hurdle_recovery_report(
    const WorldTruth& world, const std::map<std::string, ChainSet>& fits) {
  static const std::array<std::string, 3> kFields{"pi", "mu", "sigma"};
  auto field_of = [](const HurdleFactorParams& f, std::size_t i) {
    return i == 0 ? f.pi : (i == 1 ? f.mu : f.sigma);
  };

  std::vector<RecoveryClassReport> out;
  std::map<std::string, detail::RecoveryAccumulator> pooled;

  for (const auto& lang : world.languages) {
    const auto it = fits.find(lang.language);
    if (it == fits.end())
      throw InvalidInput("recovery: no fit for language '" + lang.language + "'");
    const auto& fit = it->second;

    std::map<std::string, detail::RecoveryAccumulator> acc;
    for (std::size_t i = 0; i < 3; ++i) {
      detail::accumulate_entity(acc[kFields[i] + "_l"], fit, kFields[i] + "_l",
                                field_of(lang.language_params, i));
      for (const auto& t : lang.translators)
        detail::accumulate_entity(acc[kFields[i] + "_t"], fit,
                                  kFields[i] + "_t[" + t.id + "]",
                                  field_of(t.params, i));
      for (const auto& r : lang.reviewers)
        detail::accumulate_entity(acc[kFields[i] + "_r"], fit,
                                  kFields[i] + "_r[" + r.id + "]",
                                  field_of(r.params, i));
    }
    for (const auto& [cls, a] : acc) {
      out.push_back(a.report(lang.language, cls));
      auto& p = pooled[cls];
      p.truth.insert(p.truth.end(), a.truth.begin(), a.truth.end());
      p.post_mean.insert(p.post_mean.end(), a.post_mean.begin(), a.post_mean.end());
      p.covered += a.covered;
      p.sq_err += a.sq_err;
    }
  }
  for (const auto& [cls, a] : pooled) out.push_back(a.report("pooled", cls));
  return out;
}

// Recovery of the gaussian fit's latent quality against the realised true
// quality of each job (whatever process generated the world).
inline std::vector<RecoveryClassReport> gaussian_recovery_report(
    const WorldTruth& world, const std::map<std::string, ChainSet>& fits) {
  std::vector<RecoveryClassReport> out;
  detail::RecoveryAccumulator pooled;
  const auto& recs = world.dataset.records();

  for (const auto& lang : world.languages) {
    const auto it = fits.find(lang.language);
    if (it == fits.end())
      throw InvalidInput("recovery: no fit for language '" + lang.language + "'");
    const auto& fit = it->second;

    detail::RecoveryAccumulator acc;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].language_pair != lang.language) continue;
      detail::accumulate_entity(acc, fit, "q[" + recs[i].job_id + "]",
                                world.true_quality[i]);
    }
    out.push_back(acc.report(lang.language, "q"));
    pooled.truth.insert(pooled.truth.end(), acc.truth.begin(), acc.truth.end());
    pooled.post_mean.insert(pooled.post_mean.end(), acc.post_mean.begin(),
                            acc.post_mean.end());
    pooled.covered += acc.covered;
    pooled.sq_err += acc.sq_err;
  }
  out.push_back(pooled.report("pooled", "q"));
  return out;
}

}  // namespace tqa
