#include <catch2/catch.hpp>

#include <cmath>
#include <limits>

#include "support/oracles.hpp"
#include "tqa/model_hurdle.hpp"

using namespace tqa;

namespace {

Dataset toy_dataset(std::vector<double> ept,
                    std::vector<std::string> translators = {"t0", "t1"},
                    std::vector<std::string> reviewers = {"r0"}) {
  std::vector<ReviewRecord> recs;
  for (std::size_t i = 0; i < ept.size(); ++i) {
    ReviewRecord r;
    r.job_id = "j" + std::to_string(i);
    r.language_pair = "en-xx";
    r.translator_id = translators[i % translators.size()];
    r.reviewer_id = reviewers[i % reviewers.size()];
    r.word_count = 1000;
    r.ept = ept[i];
    recs.push_back(std::move(r));
  }
  return Dataset::from_records(std::move(recs));
}

double prior_terms(const HurdleModel& model, const HurdleModelParams& p) {
  const auto& pr = model.priors();
  double lp = Beta(pr.pi_lang_a, pr.pi_lang_b).log_pdf(p.language.pi) +
              Normal(0.0, pr.mu_sd).log_pdf(p.language.mu) +
              TruncatedNormal(pr.sigma_mean, pr.sigma_sd).log_pdf(p.language.sigma);
  for (const auto& [id, f] : p.translators)
    lp += Beta(pr.pi_trans_a, pr.pi_trans_b).log_pdf(f.pi) +
          Normal(0.0, pr.mu_sd).log_pdf(f.mu) +
          TruncatedNormal(pr.sigma_mean, pr.sigma_sd).log_pdf(f.sigma);
  for (const auto& [id, f] : p.reviewers)
    lp += Beta(pr.pi_rev_a, pr.pi_rev_b).log_pdf(f.pi) +
          Normal(0.0, pr.mu_sd).log_pdf(f.mu) +
          TruncatedNormal(pr.sigma_mean, pr.sigma_sd).log_pdf(f.sigma);
  return lp;
}

HurdleModelParams interior_params(const HurdleModel& model, Rng& rng) {
  HurdleModelParams p;
  auto triple = [&rng] {
    return HurdleFactorParams{rng.uniform(0.02, 0.6), rng.uniform(-1.0, 1.0),
                              rng.uniform(0.1, 1.5)};
  };
  p.language = triple();
  for (const auto& id : model.translator_ids()) p.translators[id] = triple();
  for (const auto& id : model.reviewer_ids()) p.reviewers[id] = triple();
  return p;
}

}  // namespace

TEST_CASE("collapse identities") {
  SECTION("no atoms") {
    const auto c = collapse({0.0, 0.5, 0.3}, {0.0, -0.2, 0.4},
                            {0.0, 0.1, std::numeric_limits<double>::epsilon()});
    CHECK(c.pi == 0.0);
    CHECK(c.mu == Approx(0.4).epsilon(1e-12));
    CHECK(c.sigma == Approx(0.5).margin(1e-9));
  }
  SECTION("atom composition") {
    const auto c = collapse({0.1, 0.0, 1.0}, {0.2, 0.0, 1.0}, {0.3, 0.0, 1.0});
    CHECK(c.pi == Approx(0.496).epsilon(1e-12));
  }
  SECTION("an absorbing atom") {
    const auto c = collapse({1.0, 0.0, 1.0}, {0.2, 0.0, 1.0}, {0.3, 0.0, 1.0});
    CHECK(c.pi == 1.0);
  }
}

TEST_CASE("collapse properties") {
  Rng rng(42);
  for (int it = 0; it < 300; ++it) {
    const HurdleFactorParams a{rng.uniform(), rng.uniform(-2.0, 2.0),
                               rng.uniform(0.05, 2.0)};
    const HurdleFactorParams b{rng.uniform(), rng.uniform(-2.0, 2.0),
                               rng.uniform(0.05, 2.0)};
    const HurdleFactorParams c{rng.uniform(), rng.uniform(-2.0, 2.0),
                               rng.uniform(0.05, 2.0)};
    const auto abc = collapse(a, b, c);

    // symmetric in its arguments
    const auto cab = collapse(c, a, b);
    CHECK(abc.pi == Approx(cab.pi).epsilon(1e-12));
    CHECK(abc.mu == Approx(cab.mu).epsilon(1e-12));
    CHECK(abc.sigma == Approx(cab.sigma).epsilon(1e-12));

    // bounded atom, never below any input
    CHECK(abc.pi >= 0.0);
    CHECK(abc.pi <= 1.0);
    CHECK(abc.pi >= std::max({a.pi, b.pi, c.pi}) - 1e-12);

    // location additive, squared scale additive
    CHECK(abc.mu == Approx(a.mu + b.mu + c.mu).epsilon(1e-12));
    CHECK(abc.sigma * abc.sigma ==
          Approx(a.sigma * a.sigma + b.sigma * b.sigma + c.sigma * c.sigma)
              .epsilon(1e-12));
  }
  CHECK_THROWS_AS(collapse({-0.1, 0.0, 1.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}),
                  InvalidInput);
  CHECK_THROWS_AS(collapse({0.1, 0.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}),
                  InvalidInput);
}

TEST_CASE("zero observation likelihood equals the collapsed atom mass") {
  const auto data = toy_dataset({0.0}, {"t0"}, {"r0"});
  const HurdleModel model(data);
  Rng rng(7);
  const auto p = interior_params(model, rng);
  const auto c =
      collapse(p.language, p.translators.at("t0"), p.reviewers.at("r0"));
  const double lik = model.log_posterior(p) - prior_terms(model, p);
  CHECK(lik == Approx(std::log(c.pi)).epsilon(1e-10));
}

TEST_CASE("an atom certainty contradicting a positive score gives -inf") {
  const auto data = toy_dataset({2.5}, {"t0"}, {"r0"});
  const HurdleModel model(data);
  Rng rng(8);
  auto p = interior_params(model, rng);
  p.translators.at("t0").pi = 1.0;
  CHECK(model.log_posterior(p) == kNegInf);
}

TEST_CASE("location shifts between factors cancel in the likelihood") {
  const auto data = toy_dataset({0.0, 1.3, 2.0, 0.4, 0.0, 5.5});
  const HurdleModel model(data);
  Rng rng(9);
  const auto p = interior_params(model, rng);
  const double c = 0.37;
  auto shifted = p;
  shifted.language.mu += c;
  for (auto& [id, f] : shifted.translators) f.mu -= c;

  const double lik = model.log_posterior(p) - prior_terms(model, p);
  const double lik_shifted =
      model.log_posterior(shifted) - prior_terms(model, shifted);
  CHECK(lik == Approx(lik_shifted).epsilon(1e-10));
}

TEST_CASE("transform reference points") {
  const auto data = toy_dataset({1.0}, {"t0"}, {"r0"});
  const HurdleModel model(data);

  std::vector<double> packed(model.dim());
  for (std::size_t e = 0; e < model.n_entities(); ++e) {
    packed[3 * e] = 0.5;
    packed[3 * e + 1] = 0.0;
    packed[3 * e + 2] = 1.0;
  }
  const auto u = model.unconstrain(packed);
  for (double v : u) CHECK(v == Approx(0.0).margin(1e-15));
  // each entity contributes ln(0.5) + ln(0.5) + ln(1)
  CHECK(model.log_jacobian(u) ==
        Approx(model.n_entities() * std::log(0.25)).epsilon(1e-12));

  packed[0] = 0.496;
  const auto u2 = model.unconstrain(packed);
  CHECK(u2[0] == Approx(std::log(0.496 / 0.504)).epsilon(1e-12));
  CHECK(u2[0] == Approx(-0.016).margin(1e-4));
}

TEST_CASE("transform round trip") {
  const auto data = toy_dataset({1.0, 0.0, 2.0});
  const HurdleModel model(data);
  Rng rng(10);
  for (int it = 0; it < 1000; ++it) {
    std::vector<double> packed(model.dim());
    for (std::size_t e = 0; e < model.n_entities(); ++e) {
      packed[3 * e] = rng.uniform(1e-6, 1.0 - 1e-6);
      packed[3 * e + 1] = rng.uniform(-3.0, 3.0);
      packed[3 * e + 2] = std::exp(rng.uniform(-2.0, 2.0));
    }
    const auto u = model.unconstrain(packed);
    const auto back = model.constrain(u);
    for (std::size_t i = 0; i < packed.size(); ++i)
      CHECK(back[i] == Approx(packed[i]).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("boundary pi has no unconstrained image") {
  const auto data = toy_dataset({1.0}, {"t0"}, {"r0"});
  const HurdleModel model(data);
  std::vector<double> packed(model.dim());
  for (std::size_t e = 0; e < model.n_entities(); ++e) {
    packed[3 * e] = 0.5;
    packed[3 * e + 1] = 0.0;
    packed[3 * e + 2] = 1.0;
  }
  packed[0] = 0.0;
  CHECK_THROWS_AS(model.unconstrain(packed), InvalidInput);
  packed[0] = 1.0;
  CHECK_THROWS_AS(model.unconstrain(packed), InvalidInput);
}

TEST_CASE("unconstrained density equals constrained density plus jacobian") {
  const auto data = toy_dataset({0.0, 1.3, 2.0, 0.4, 0.0, 5.5, 0.9});
  const HurdleModel model(data);
  Rng rng(11);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> u(model.dim());
    for (auto& v : u) v = rng.uniform(-2.0, 2.0);
    const double fast = model.log_density(u);
    const double direct =
        model.log_posterior(model.unpack(model.constrain(u))) + model.log_jacobian(u);
    CHECK(fast == Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  const auto data = toy_dataset({0.0, 1.3, 2.0, 0.4, 0.0, 5.5, 0.9});
  const HurdleModel model(data);
  REQUIRE(model.has_gradient());
  Rng rng(24);
  const double h = 1e-5;
  for (int it = 0; it < 100; ++it) {
    std::vector<double> u(model.dim());
    for (auto& v : u) v = rng.uniform(-1.5, 1.5);
    std::vector<double> grad(model.dim());
    const double lp = model.log_density_gradient(u, grad);
    CHECK(lp == Approx(model.log_density(u)).epsilon(1e-12));
    for (std::size_t i = 0; i < model.dim(); ++i) {
      auto up = u, dn = u;
      up[i] += h;
      dn[i] -= h;
      const double fd = (model.log_density(up) - model.log_density(dn)) / (2 * h);
      CHECK(grad[i] == Approx(fd).epsilon(1e-4).margin(1e-6));
    }
  }
}

TEST_CASE("missing entities are a structural error") {
  const auto data = toy_dataset({1.0, 2.0});
  const HurdleModel model(data);
  Rng rng(12);
  auto p = interior_params(model, rng);
  p.translators.erase("t1");
  CHECK_THROWS_AS(model.log_posterior(p), InvalidInput);
}

TEST_CASE("hurdle replication") {
  SECTION("language atom certainty zeroes everything") {
    const auto data = toy_dataset({1.0, 2.0, 0.5});
    const HurdleModel model(data);
    Rng rng(13);
    auto p = interior_params(model, rng);
    p.language.pi = 1.0;
    const auto draw = model.pack(p);
    std::vector<double> out(3);
    Rng rep_rng(14);
    model.replicate(draw, rep_rng, out);
    for (double v : out) CHECK(v == 0.0);
  }
  SECTION("zero fraction matches the collapsed atom") {
    const auto data = toy_dataset({1.0}, {"t0"}, {"r0"});
    const HurdleModel model(data);
    HurdleModelParams p;
    p.language = {0.2, 0.0, 1.0};
    p.translators["t0"] = {0.0, 0.0, 1e-9};
    p.reviewers["r0"] = {0.0, 0.0, 1e-9};
    const auto draw = model.pack(p);
    Rng rng(15);
    std::vector<double> out(1);
    std::size_t zeros = 0;
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
      model.replicate(draw, rng, out);
      zeros += out[0] == 0.0 ? 1 : 0;
    }
    const double frac = static_cast<double>(zeros) / static_cast<double>(n);
    CHECK(std::fabs(frac - 0.2) < 0.002);
  }
}

TEST_CASE("factor-product sampling matches collapsed sampling") {
  // the three-factor product observation process and the collapsed
  // single hurdle lognormal generate the same distribution
  Rng rng(314);
  const HurdleFactorParams lang{0.08, 0.3, 0.5};
  const HurdleFactorParams trans{0.05, -0.4, 0.7};
  const HurdleFactorParams rev{0.03, 0.1, 0.4};
  const auto c = collapse(lang, trans, rev);

  const std::size_t n = 1000000;
  std::vector<double> product(n), collapsed(n);
  Rng r1 = rng.split(1), r2 = rng.split(2);
  const HurdleLognormal dl(lang.pi, lang.mu, lang.sigma);
  const HurdleLognormal dt(trans.pi, trans.mu, trans.sigma);
  const HurdleLognormal dr(rev.pi, rev.mu, rev.sigma);
  for (std::size_t i = 0; i < n; ++i)
    product[i] = dl.sample(r1) * dt.sample(r1) * dr.sample(r1);
  const HurdleLognormal dc(c.pi, c.mu, c.sigma);
  for (std::size_t i = 0; i < n; ++i) collapsed[i] = dc.sample(r2);

  CHECK(oracle::ks_two_sample(product, collapsed) < 0.005);
}

TEST_CASE("initial point sits at the prior centre") {
  const auto data = toy_dataset({1.0}, {"t0"}, {"r0"});
  const HurdleModel model(data);
  const auto packed = model.constrain(model.initial_point());
  const auto p = model.unpack(packed);
  CHECK(p.language.pi == Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(p.translators.at("t0").pi == Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(p.reviewers.at("r0").pi == Approx(1.5 / 6.5).epsilon(1e-12));
  CHECK(p.language.mu == 0.0);
  CHECK(p.language.sigma == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("swapped zero-probability priors") {
  const HurdlePriors swapped = HurdlePriors{}.swapped_pi();
  CHECK(swapped.pi_lang_a == 1.5);
  CHECK(swapped.pi_trans_a == 1.5);
  CHECK(swapped.pi_rev_a == 2.0);

  const auto data = toy_dataset({1.0}, {"t0"}, {"r0"});
  const HurdleModel model(data, swapped);
  const auto p = model.unpack(model.constrain(model.initial_point()));
  CHECK(p.language.pi == Approx(1.5 / 6.5).epsilon(1e-12));
  CHECK(p.reviewers.at("r0").pi == Approx(2.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("parameter names carry entity ids") {
  const auto data = toy_dataset({1.0, 2.0});
  const HurdleModel model(data);
  const auto names = model.parameter_names();
  REQUIRE(names.size() == model.dim());
  CHECK(names[0] == "pi_l");
  CHECK(names[3] == "pi_t[t0]");
  CHECK(names[4] == "mu_t[t0]");
  CHECK(names[names.size() - 1] == "sigma_r[r0]");
}
