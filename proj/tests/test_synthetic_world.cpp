#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "tqa/model_gaussian.hpp"
#include "tqa/synthetic_world.hpp"

using namespace tqa;

TEST_CASE("world generation is deterministic") {
  WorldConfig cfg;
  cfg.n_languages = 2;
  cfg.n_translators = 5;
  cfg.n_reviewers = 4;
  cfg.n_jobs = 50;
  cfg.seed = 99;
  Rng r1(cfg.seed), r2(cfg.seed);
  const auto a = generate_world(cfg, r1);
  const auto b = generate_world(cfg, r2);
  REQUIRE(a.dataset.size() == b.dataset.size());
  for (std::size_t i = 0; i < a.dataset.size(); ++i) {
    CHECK(a.dataset.records()[i].job_id == b.dataset.records()[i].job_id);
    CHECK(a.dataset.records()[i].ept == b.dataset.records()[i].ept);
    CHECK(a.dataset.records()[i].word_count == b.dataset.records()[i].word_count);
  }
  CHECK(a.true_quality == b.true_quality);
}

TEST_CASE("zero fraction follows the atom composition") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 10;
  cfg.n_reviewers = 5;
  cfg.n_jobs = 100000;
  cfg.seed = 4;
  cfg.params_from_priors = false;
  cfg.explicit_params.pi_lang = 0.1;
  cfg.explicit_params.pi_trans = 0.1;
  cfg.explicit_params.pi_rev = 0.1;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);

  std::size_t zeros = 0;
  for (const auto& r : world.dataset.records()) zeros += (r.ept == 0.0) ? 1 : 0;
  const double frac = static_cast<double>(zeros) / static_cast<double>(cfg.n_jobs);
  const double expected = 1.0 - 0.9 * 0.9 * 0.9;  // 0.271
  CHECK(std::fabs(frac - expected) < 0.006);
}

TEST_CASE("positive scores stay lognormal in shape") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 10;
  cfg.n_reviewers = 5;
  cfg.n_jobs = 100000;
  cfg.seed = 5;
  cfg.params_from_priors = false;
  // atoms tuned so roughly a fifth of the jobs come out perfect
  cfg.explicit_params.pi_lang = 0.0717;
  cfg.explicit_params.pi_trans = 0.0717;
  cfg.explicit_params.pi_rev = 0.0717;
  cfg.skills.mu_t_sd = 0.0;
  cfg.skills.mu_t_offset_l1 = 0.0;
  cfg.skills.mu_t_offset_l2 = 0.0;
  cfg.skills.sigma_t_sd = 1e-12;
  cfg.skills.sigma_l_sd = 1e-12;
  cfg.skills.sigma_r_sd = 1e-12;
  cfg.skills.sigma_r_skilled_mean = 0.4;
  cfg.skills.sigma_r_unknown_mean = 0.4;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);

  std::size_t zeros = 0;
  for (const auto& r : world.dataset.records()) zeros += (r.ept == 0.0) ? 1 : 0;
  const double frac = static_cast<double>(zeros) / static_cast<double>(cfg.n_jobs);
  CHECK(std::fabs(frac - 0.2) < 0.01);

  const auto shape = standardized_log_shape(world.dataset);
  CHECK(std::fabs(shape.skewness) < 0.05);
}

TEST_CASE("positive part obeys the additive log decomposition") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 6;
  cfg.n_reviewers = 4;
  cfg.n_jobs = 100000;
  cfg.seed = 21;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);
  const auto& lang = world.languages[0];

  // expected mean of log score over positives, averaged over the realised
  // assignment of translators and reviewers
  std::map<std::string, double> mu_t, mu_r;
  for (const auto& t : lang.translators) mu_t[t.id] = t.params.mu;
  for (const auto& r : lang.reviewers) mu_r[r.id] = r.params.mu;
  double expected = 0.0, got = 0.0;
  std::size_t n_pos = 0;
  double var_sum = 0.0;
  for (const auto& rec : world.dataset.records()) {
    if (rec.ept <= 0.0) continue;
    expected += lang.language_params.mu + mu_t.at(rec.translator_id) +
                mu_r.at(rec.reviewer_id);
    got += std::log(rec.ept);
    ++n_pos;
  }
  expected /= static_cast<double>(n_pos);
  got /= static_cast<double>(n_pos);
  // conservative per-job log sd bound of ~2 covers the prior draws
  const double se = 2.0 / std::sqrt(static_cast<double>(n_pos));
  CHECK(std::fabs(got - expected) < 4.0 * se);
  (void)var_sum;
}

TEST_CASE("annotation back-solve stays within the quantisation bound") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 5;
  cfg.n_reviewers = 3;
  cfg.n_jobs = 2000;
  cfg.seed = 6;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);
  REQUIRE(world.dataset_quantized.size() == world.dataset.size());
  for (std::size_t i = 0; i < world.dataset.size(); ++i) {
    const auto& cont = world.dataset.records()[i];
    const auto& quant = world.dataset_quantized.records()[i];
    REQUIRE(quant.annotations.has_value());
    const double recomputed = compute_ept(*quant.annotations, quant.word_count);
    CHECK(recomputed == quant.ept);
    CHECK(std::fabs(recomputed - cont.ept) <=
          1000.0 / static_cast<double>(cont.word_count));
  }
}

TEST_CASE("skill groups and dual roles are wired into the labels") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 20;
  cfg.n_reviewers = 10;
  cfg.n_jobs = 10;
  cfg.dual_role_fraction = 0.5;
  cfg.seed = 7;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);
  const auto& lang = world.languages[0];

  std::size_t l1 = 0, l2 = 0;
  for (const auto& t : lang.translators) {
    l1 += t.level == "L1" ? 1 : 0;
    l2 += t.level == "L2" ? 1 : 0;
  }
  CHECK(l1 == 4);
  CHECK(l2 == 4);

  std::set<std::string> translator_ids;
  for (const auto& t : lang.translators) translator_ids.insert(t.id);
  std::size_t dual = 0;
  for (const auto& r : lang.reviewers) dual += translator_ids.count(r.id);
  CHECK(dual == 5);

  const auto labels = world.labels();
  CHECK(labels.size() == 25);  // 20 translators + 5 reviewer-only linguists
}

TEST_CASE("designed reviewer consistency separates skilled from unknown") {
  WorldConfig cfg;
  cfg.n_languages = 3;
  cfg.n_translators = 20;
  cfg.n_reviewers = 10;
  cfg.n_jobs = 10;
  cfg.seed = 8;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);
  std::vector<double> skilled, unknown;
  for (const auto& lang : world.languages)
    for (const auto& r : lang.reviewers)
      (r.level == "unknown" ? unknown : skilled).push_back(r.params.sigma);
  REQUIRE(!skilled.empty());
  REQUIRE(!unknown.empty());
  CHECK(mean(skilled) < mean(unknown));
}

TEST_CASE("config validation and json round trip") {
  WorldConfig cfg;
  cfg.skills.frac_l1 = 0.5;
  cfg.skills.frac_l2 = 0.4;
  cfg.skills.frac_unknown = 0.4;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK_THROWS_WITH(cfg.validate(), Catch::Contains("frac"));

  WorldConfig good;
  good.n_jobs = 123;
  good.seed = 77;
  good.generative_model = "gaussian";
  good.skills.mu_t_sd = 0.9;
  const auto j = good.to_json();
  const auto back = WorldConfig::from_json(j);
  CHECK(back.n_jobs == 123);
  CHECK(back.seed == 77);
  CHECK(back.generative_model == "gaussian");
  CHECK(back.skills.mu_t_sd == 0.9);

  WorldConfig infeasible;
  infeasible.n_translators = 1;
  infeasible.n_reviewers = 2;
  infeasible.dual_role_fraction = 1.0;
  Rng rng(1);
  CHECK_THROWS_AS(generate_world(infeasible, rng), InvalidInput);
}

TEST_CASE("gaussian worlds clip at zero and keep additive truth") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 4;
  cfg.n_reviewers = 3;
  cfg.n_jobs = 5000;
  cfg.generative_model = "gaussian";
  cfg.seed = 9;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);
  for (const auto& r : world.dataset.records()) CHECK(r.ept >= 0.0);
  REQUIRE(world.languages[0].gauss_beta.size() == 3);
  REQUIRE(world.languages[0].gauss_sigma.size() == 3);
  for (double q : world.true_quality) CHECK(q >= 0.0);
}

TEST_CASE("recovery report on a small end-to-end fit") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 8;
  cfg.n_reviewers = 4;
  cfg.n_jobs = 400;
  cfg.seed = 2025;
  Rng world_rng(cfg.seed);
  const auto world = generate_world(cfg, world_rng);

  const auto slice = world.dataset.slice_language("lang_00");
  const HurdleModel model(slice);
  SamplerConfig mcmc;
  mcmc.seed = 11;
  mcmc.n_warmup = 2500;
  mcmc.n_samples = 4000;
  mcmc.thin = 2;
  std::map<std::string, ChainSet> fits;
  fits.emplace("lang_00", run_mcmc(model, mcmc, Rng(mcmc.seed)));

  const auto report = hurdle_recovery_report(world, fits);
  bool saw_mu_t = false;
  for (const auto& row : report) {
    if (row.language == "lang_00" && row.param_class == "mu_t") {
      saw_mu_t = true;
      CHECK(row.n == 8);
      REQUIRE(row.spearman_defined);
      CHECK(row.spearman > 0.3);
      CHECK(row.coverage >= 0.0);
      CHECK(row.coverage <= 1.0);
      CHECK(row.rmse < 2.0);
    }
  }
  CHECK(saw_mu_t);

  // pooled rows aggregate across languages
  std::size_t pooled_rows = 0;
  for (const auto& row : report) pooled_rows += row.language == "pooled" ? 1 : 0;
  CHECK(pooled_rows == 9);
}

TEST_CASE("tied truth reports rank correlation as not applicable") {
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 5;
  cfg.n_reviewers = 3;
  cfg.n_jobs = 60;
  cfg.seed = 12;
  cfg.params_from_priors = false;
  cfg.skills.mu_t_sd = 0.0;
  cfg.skills.frac_l1 = 0.0;
  cfg.skills.frac_l2 = 0.0;
  cfg.skills.frac_unknown = 1.0;
  cfg.skills.sigma_t_sd = 1e-12;
  Rng world_rng(cfg.seed);
  const auto world = generate_world(cfg, world_rng);

  const auto slice = world.dataset.slice_language("lang_00");
  const HurdleModel model(slice);
  SamplerConfig mcmc;
  mcmc.seed = 13;
  mcmc.n_warmup = 800;
  mcmc.n_samples = 800;
  std::map<std::string, ChainSet> fits;
  fits.emplace("lang_00", run_mcmc(model, mcmc, Rng(mcmc.seed)));

  const auto report = hurdle_recovery_report(world, fits);
  for (const auto& row : report) {
    if (row.language == "lang_00" && row.param_class == "mu_t") {
      CHECK_FALSE(row.spearman_defined);
      CHECK(row.n == 5);
    }
  }
}

TEST_CASE("misspecified fit undercovers the latent quality") {
  // hurdle-generated scores carry an exact-zero atom the additive model
  // cannot express; its latent-quality intervals miss those truths
  WorldConfig cfg;
  cfg.n_languages = 1;
  cfg.n_translators = 6;
  cfg.n_reviewers = 3;
  cfg.n_jobs = 200;
  cfg.seed = 14;
  Rng world_rng(cfg.seed);
  const auto world = generate_world(cfg, world_rng);

  const auto slice = world.dataset.slice_language("lang_00");
  const GaussianModel model(slice);
  SamplerConfig mcmc;
  mcmc.seed = 15;
  mcmc.n_warmup = 2000;
  mcmc.n_samples = 3000;
  mcmc.thin = 2;
  std::map<std::string, ChainSet> fits;
  fits.emplace("lang_00", run_mcmc(model, mcmc, Rng(mcmc.seed)));

  const auto report = gaussian_recovery_report(world, fits);
  bool saw = false;
  for (const auto& row : report) {
    if (row.language == "pooled" && row.param_class == "q") {
      saw = true;
      CHECK(row.coverage < 0.85);
    }
  }
  CHECK(saw);
}

TEST_CASE("world files round trip through the dataset schema") {
  WorldConfig cfg;
  cfg.n_languages = 2;
  cfg.n_translators = 4;
  cfg.n_reviewers = 3;
  cfg.n_jobs = 30;
  cfg.seed = 16;
  Rng rng(cfg.seed);
  const auto world = generate_world(cfg, rng);

  const auto dir = std::filesystem::temp_directory_path() / "tqa_world_test";
  std::filesystem::remove_all(dir);
  world.save(dir);
  const auto loaded = Dataset::load_csv((dir / "dataset.csv").string());
  REQUIRE(loaded.size() == world.dataset.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded.records()[i].job_id == world.dataset.records()[i].job_id);
    CHECK(std::fabs(loaded.records()[i].ept - world.dataset.records()[i].ept) <=
          1e-12 * std::max(1.0, world.dataset.records()[i].ept));
  }
  const auto quant = Dataset::load_csv((dir / "dataset_quantized.csv").string());
  REQUIRE(quant.size() == world.dataset.size());
  std::filesystem::remove_all(dir);
}
