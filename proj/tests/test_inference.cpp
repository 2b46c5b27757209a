#include <catch2/catch.hpp>

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"
#include "tqa/chain_io.hpp"
#include "tqa/distributions.hpp"
#include "tqa/inference.hpp"

using namespace tqa;

namespace {

struct StdNormalTarget : TargetDensity {
  std::size_t d;
  explicit StdNormalTarget(std::size_t dim = 1) : d(dim) {}
  std::size_t dim() const override { return d; }
  double log_density(std::span<const double> u) const override {
    double lp = 0.0;
    for (double v : u) lp += -0.5 * v * v;
    return lp;
  }
  bool has_gradient() const override { return true; }
  double log_density_gradient(std::span<const double> u,
                              std::span<double> grad) const override {
    double lp = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      lp += -0.5 * u[i] * u[i];
      grad[i] = -u[i];
    }
    return lp;
  }
};

// y_i ~ N(theta, 1) with prior theta ~ N(0, 1); the posterior is
// N(sum(y)/(n+1), 1/(n+1)).
struct ConjugateTarget : TargetDensity {
  std::vector<double> y;
  std::size_t dim() const override { return 1; }
  double log_density(std::span<const double> u) const override {
    const double theta = u[0];
    double lp = -0.5 * theta * theta;
    for (double v : y) lp += -0.5 * (v - theta) * (v - theta);
    return lp;
  }
};

struct NanTarget : TargetDensity {
  std::size_t dim() const override { return 1; }
  double log_density(std::span<const double>) const override {
    return std::numeric_limits<double>::quiet_NaN();
  }
};

// Finite only in a ball far smaller than any reachable proposal scale, so
// every proposal is rejected.
struct NeedleTarget : TargetDensity {
  std::size_t dim() const override { return 1; }
  double log_density(std::span<const double> u) const override {
    return std::fabs(u[0]) < 1e-30 ? 0.0 : kNegInf;
  }
};

}  // namespace

TEST_CASE("r_hat and ess on iid chains") {
  Rng rng(100);
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (auto& c : chains)
    for (auto& v : c) v = sample_standard_normal(rng);
  const double rhat = r_hat(chains);
  CHECK(rhat > 0.99);
  CHECK(rhat < 1.02);
  CHECK(ess(chains) >= 3000.0);
}

TEST_CASE("r_hat detects disjoint chains") {
  Rng rng(101);
  std::vector<std::vector<double>> chains(2, std::vector<double>(1000));
  for (auto& v : chains[0]) v = sample_standard_normal(rng);
  for (auto& v : chains[1]) v = 10.0 + sample_standard_normal(rng);
  CHECK(r_hat(chains) > 3.0);
}

TEST_CASE("diagnostics reject degenerate input") {
  std::vector<std::vector<double>> constant(4, std::vector<double>(100, 1.5));
  CHECK_THROWS_AS(r_hat(constant), InsufficientData);
  CHECK_THROWS_AS(ess(constant), InsufficientData);
  std::vector<std::vector<double>> one_chain(1, std::vector<double>(100, 0.0));
  CHECK_THROWS_AS(r_hat(one_chain), InvalidInput);
  std::vector<std::vector<double>> short_chains(2, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(r_hat(short_chains), InvalidInput);
}

TEST_CASE("sampler recovers a standard normal") {
  StdNormalTarget target(1);
  SamplerConfig cfg;
  cfg.seed = 42;
  const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));

  REQUIRE(cs.n_chains == 4);
  REQUIRE(cs.n_draws == 1000);
  const auto pooled = cs.pooled(0);
  CHECK(std::fabs(mean(pooled)) < 0.1);
  CHECK(std::fabs(sample_sd(pooled) - 1.0) < 0.1);

  const auto summaries = summarize(cs);
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].ess >= 400.0);
  CHECK(summaries[0].rhat < 1.05);
}

TEST_CASE("conjugate posterior matches the analytic solution") {
  // twenty seeded repetitions, each within three Monte Carlo standard
  // errors of the analytic posterior moments
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    ConjugateTarget target;
    Rng data_rng(900 + rep);
    target.y.resize(9);
    for (auto& v : target.y) v = 0.7 + sample_standard_normal(data_rng);
    double sum = 0.0;
    for (double v : target.y) sum += v;
    const double post_mean = sum / 10.0;
    const double post_var = 0.1;

    SamplerConfig cfg;
    cfg.seed = 1000 + rep;
    cfg.n_warmup = 1000;
    cfg.n_samples = 2000;
    const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));
    const auto summaries = summarize(cs);
    REQUIRE(summaries.size() == 1);
    const auto& s = summaries[0];

    CHECK(s.ess >= 400.0);
    CHECK(s.rhat <= 1.01);

    const double mcse_mean = std::sqrt(post_var / s.ess);
    CHECK(std::fabs(s.mean - post_mean) < 3.0 * mcse_mean);

    // the variance estimate mixes like the squared-centred series, so its
    // Monte Carlo error uses that series' effective sample size
    auto sq_chains = cs.chains_for(0);
    for (auto& chain : sq_chains)
      for (auto& v : chain) v = (v - post_mean) * (v - post_mean);
    const double ess_sq = ess(sq_chains);
    const double var_hat = s.sd * s.sd;
    const double mcse_var = post_var * std::sqrt(2.0 / ess_sq);
    CHECK(std::fabs(var_hat - post_var) < 3.0 * mcse_var);
  }
}

TEST_CASE("same seed gives an identical chain set") {
  StdNormalTarget target(3);
  SamplerConfig cfg;
  cfg.seed = 7;
  cfg.n_warmup = 200;
  cfg.n_samples = 300;
  const auto a = run_mcmc(target, cfg, Rng(cfg.seed));
  const auto b = run_mcmc(target, cfg, Rng(cfg.seed));
  CHECK(a.draws == b.draws);
  CHECK(a.acceptance_rates == b.acceptance_rates);
  const auto c = run_mcmc(target, cfg, Rng(cfg.seed + 1));
  CHECK(a.draws != c.draws);
}

TEST_CASE("initialisation and stuck-chain errors") {
  SamplerConfig cfg;
  cfg.n_warmup = 500;
  cfg.n_samples = 10;
  cfg.init_jitter = 0.0;
  CHECK_THROWS_AS(run_mcmc(NanTarget{}, cfg, Rng(1)), SamplingError);
  CHECK_THROWS_AS(run_mcmc(NeedleTarget{}, cfg, Rng(1)), SamplingError);
}

TEST_CASE("random-walk kernel leaves the target invariant") {
  // detailed-balance smoke test: one long chain against the exact CDF
  StdNormalTarget target(1);
  SamplerConfig cfg;
  cfg.seed = 5150;
  cfg.n_chains = 1;
  cfg.n_warmup = 2000;
  cfg.n_samples = 1000000;
  const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));
  const auto draws = cs.pooled(0);
  const double d = oracle::ks_distance(draws, [](double x) { return normal_cdf(x); });
  CHECK(d < 0.01);
}

TEST_CASE("adaptation settles near the target acceptance rate") {
  StdNormalTarget target(5);
  SamplerConfig cfg;
  cfg.seed = 31;
  cfg.n_warmup = 2000;
  cfg.n_samples = 4000;
  const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));
  for (double rate : cs.acceptance_rates)
    CHECK(std::fabs(rate - cfg.target_acceptance) < 0.1);
}

TEST_CASE("alternative kernels recover the standard normal") {
  StdNormalTarget target(5);
  for (const char* algorithm : {"adaptive_rwm_full", "ensemble_stretch", "hmc"}) {
    SamplerConfig cfg;
    cfg.algorithm = algorithm;
    cfg.seed = 77;
    cfg.n_warmup = 2000;
    cfg.n_samples = 2000;
    if (cfg.algorithm == "hmc") cfg.target_acceptance = 0.8;
    const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));
    for (std::size_t p = 0; p < 5; ++p) {
      const auto pooled = cs.pooled(p);
      INFO(algorithm << " p=" << p);
      CHECK(std::fabs(mean(pooled)) < 0.1);
      CHECK(std::fabs(sample_sd(pooled) - 1.0) < 0.1);
    }
    const auto gate = check_convergence(summarize(cs), cfg);
    INFO(algorithm);
    CHECK(gate.accepted);
  }
}

TEST_CASE("hmc requires a gradient") {
  ConjugateTarget no_grad;
  no_grad.y = {0.1, 0.2};
  SamplerConfig cfg;
  cfg.algorithm = "hmc";
  CHECK_THROWS_AS(run_mcmc(no_grad, cfg, Rng(1)), InvalidInput);
}

TEST_CASE("config validation") {
  StdNormalTarget target(1);
  SamplerConfig cfg;
  cfg.n_chains = 0;
  CHECK_THROWS_AS(run_mcmc(target, cfg, Rng(1)), InvalidInput);
  cfg = {};
  cfg.algorithm = "nuts";
  CHECK_THROWS_AS(run_mcmc(target, cfg, Rng(1)), InvalidInput);
  cfg = {};
  cfg.target_acceptance = 1.5;
  CHECK_THROWS_AS(run_mcmc(target, cfg, Rng(1)), InvalidInput);
}

TEST_CASE("draws round-trip through the CSV format") {
  StdNormalTarget target(3);
  SamplerConfig cfg;
  cfg.seed = 12;
  cfg.n_chains = 2;
  cfg.n_warmup = 200;
  cfg.n_samples = 50;
  const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));

  std::ostringstream out;
  save_draws_csv(out, cs);
  std::istringstream in(out.str());
  const auto back = load_draws_csv(in);

  CHECK(back.n_chains == cs.n_chains);
  CHECK(back.n_draws == cs.n_draws);
  CHECK(back.parameter_names == cs.parameter_names);
  REQUIRE(back.draws.size() == cs.draws.size());
  CHECK(back.draws == cs.draws);  // shortest round-trip formatting is exact
}

TEST_CASE("summary json carries the declared fields") {
  StdNormalTarget target(2);
  SamplerConfig cfg;
  cfg.seed = 13;
  cfg.n_warmup = 300;
  cfg.n_samples = 400;
  const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));
  const auto summaries = summarize(cs);
  const auto gate = check_convergence(summaries, cfg);
  const auto j = summary_json(cs, summaries, gate);

  CHECK(j.at("seed") == 13);
  CHECK(j.at("algorithm") == "adaptive_rwm");
  CHECK(j.at("n_chains") == 4);
  CHECK(j.at("acceptance_rates").size() == 4);
  CHECK(j.contains("elapsed_seconds"));
  CHECK(j.at("gate").contains("accepted"));
  REQUIRE(j.at("parameters").size() == 2);
  for (const char* key : {"name", "mean", "sd", "q2_5", "median", "q97_5",
                          "r_hat", "ess"})
    CHECK(j.at("parameters")[0].contains(key));
}

TEST_CASE("convergence gate") {
  StdNormalTarget target(2);
  SamplerConfig cfg;
  cfg.seed = 8;
  const auto cs = run_mcmc(target, cfg, Rng(cfg.seed));
  const auto summaries = summarize(cs);
  const auto gate = check_convergence(summaries, cfg);
  CHECK(gate.accepted);
  CHECK(gate.max_rhat <= cfg.gate_max_rhat);
  CHECK(gate.min_ess >= cfg.gate_min_ess);

  SamplerConfig strict = cfg;
  strict.gate_min_ess = 1e9;
  CHECK_FALSE(check_convergence(summaries, strict).accepted);
}
