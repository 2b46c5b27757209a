#include <catch2/catch.hpp>

#include <cmath>

#include "support/oracles.hpp"
#include "tqa/distributions.hpp"

using namespace tqa;

TEST_CASE("normal log density at the mode") {
  const Normal d(0.0, 1.0);
  CHECK(d.log_pdf(0.0) == Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("gamma is shape/scale parameterised") {
  // Gamma(1, 3) is the exponential with mean 3
  const Gamma d(1.0, 3.0);
  CHECK(d.log_pdf(3.0) == Approx(-std::log(3.0) - 1.0).epsilon(1e-12));
  CHECK(d.log_pdf(0.0) == Approx(-std::log(3.0)).epsilon(1e-12));
  CHECK(d.log_pdf(-0.1) == kNegInf);
}

TEST_CASE("beta modes sit where expected") {
  // mode of Beta(a,b) is (a-1)/(a+b-2)
  const Beta b25(2.0, 5.0);
  const double m25 = 0.2;
  CHECK(b25.log_pdf(m25) > b25.log_pdf(m25 - 0.01));
  CHECK(b25.log_pdf(m25) > b25.log_pdf(m25 + 0.01));

  const Beta b155(1.5, 5.0);
  const double m155 = 0.5 / 4.5;
  CHECK(b155.log_pdf(m155) > b155.log_pdf(m155 - 0.01));
  CHECK(b155.log_pdf(m155) > b155.log_pdf(m155 + 0.01));
  CHECK(m155 < m25);  // reviewer prior has the lower mode
  CHECK(b25.log_pdf(-0.01) == kNegInf);
  CHECK(b25.log_pdf(1.01) == kNegInf);
}

TEST_CASE("hurdle lognormal log density") {
  SECTION("atom mass") {
    const HurdleLognormal d(0.2, 3.0, 2.0);
    CHECK(d.log_pdf(0.0) == Approx(std::log(0.2)).epsilon(1e-12));
  }
  SECTION("positive part") {
    const HurdleLognormal d(0.2, 0.0, 1.0);
    CHECK(d.log_pdf(1.0) ==
          Approx(std::log(0.8) - 0.9189385332046727).epsilon(1e-12));
  }
  SECTION("impossible outcomes") {
    CHECK(HurdleLognormal(0.0, 0.0, 1.0).log_pdf(0.0) == kNegInf);
    CHECK(HurdleLognormal(1.0, 0.0, 1.0).log_pdf(2.0) == kNegInf);
  }
  SECTION("negative argument is a domain error") {
    CHECK_THROWS_AS(HurdleLognormal(0.2, 0.0, 1.0).log_pdf(-1.0), InvalidInput);
  }
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(Normal(0.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(Normal(0.0, -1.0), InvalidInput);
  CHECK_THROWS_AS(Gamma(0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(Gamma(1.0, -1.0), InvalidInput);
  CHECK_THROWS_AS(Beta(0.0, 2.0), InvalidInput);
  CHECK_THROWS_AS(Lognormal(0.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(HurdleLognormal(-0.1, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(HurdleLognormal(1.1, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(TruncatedNormal(0.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(HalfNormal(-2.0), InvalidInput);
}

TEST_CASE("every density integrates to one") {
  const double tol = 1e-6;

  CHECK(oracle::simpson([](double x) { return std::exp(Normal(0.3, 1.7).log_pdf(x)); },
                        0.3 - 22.1, 0.3 + 22.1, 40000) == Approx(1.0).margin(tol));

  CHECK(oracle::simpson(
            [](double x) { return std::exp(TruncatedNormal(0.5, 0.5).log_pdf(x)); },
            0.0, 0.5 + 6.5, 40000) == Approx(1.0).margin(tol));

  CHECK(oracle::simpson([](double x) { return std::exp(HalfNormal(1.0).log_pdf(x)); },
                        0.0, 13.0, 40000) == Approx(1.0).margin(tol));

  CHECK(oracle::simpson([](double x) { return std::exp(Gamma(1.0, 3.0).log_pdf(x)); },
                        0.0, 150.0, 400000) == Approx(1.0).margin(tol));

  CHECK(oracle::simpson([](double x) { return std::exp(Gamma(2.5, 1.3).log_pdf(x)); },
                        0.0, 80.0, 200000) == Approx(1.0).margin(tol));

  CHECK(oracle::simpson([](double x) { return std::exp(Beta(2.0, 5.0).log_pdf(x)); },
                        0.0, 1.0, 200000) == Approx(1.0).margin(tol));

  CHECK(oracle::simpson([](double x) { return std::exp(Beta(1.5, 5.0).log_pdf(x)); },
                        0.0, 1.0, 400000) == Approx(1.0).margin(tol));

  // lognormal over log-substitution: integrand becomes pdf(e^y) * e^y
  CHECK(oracle::simpson(
            [](double y) {
              const double x = std::exp(y);
              return std::exp(Lognormal(0.0, 1.0).log_pdf(x)) * x;
            },
            -14.0, 14.0, 40000) == Approx(1.0).margin(tol));

  // hurdle: atom plus the continuous part
  {
    const HurdleLognormal d(0.3, 0.2, 0.8);
    const double cont = oracle::simpson(
        [&](double y) {
          const double x = std::exp(y);
          return std::exp(d.log_pdf(x)) * x;
        },
        0.2 - 12.0 * 0.8, 0.2 + 12.0 * 0.8, 40000);
    CHECK(0.3 + cont == Approx(1.0).margin(tol));
  }
}

TEST_CASE("samplers match their analytic CDFs") {
  // KS distance over 1e5 draws; 0.01 is ~3.7 times the expected distance
  const std::size_t n = 100000;
  const double bound = 0.01;
  Rng rng(20240801);

  SECTION("normal") {
    const Normal d(1.0, 2.0);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(s, [&](double x) { return d.cdf(x); }) < bound);
  }
  SECTION("truncated normal") {
    const TruncatedNormal d(0.5, 0.5);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(s, [&](double x) { return d.cdf(x); }) < bound);
    for (double v : s) REQUIRE(v >= 0.0);
  }
  SECTION("truncated normal, far tail") {
    const TruncatedNormal d(-2.0, 0.5);  // truncation point 4 sd above mu
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(s, [&](double x) { return d.cdf(x); }) < bound);
  }
  SECTION("half normal") {
    const HalfNormal d(1.5);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(s, [&](double x) { return d.cdf(x); }) < bound);
  }
  SECTION("gamma, shape 1") {
    const Gamma d(1.0, 3.0);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(
              s, [&](double x) { return oracle::gammap(1.0, x / 3.0); }) < bound);
  }
  SECTION("gamma, shape below 1") {
    const Gamma d(0.7, 2.0);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(
              s, [&](double x) { return oracle::gammap(0.7, x / 2.0); }) < bound);
  }
  SECTION("beta") {
    const Beta d(2.0, 5.0);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(
              s, [&](double x) { return oracle::betai(2.0, 5.0, x); }) < bound);
  }
  SECTION("lognormal") {
    const Lognormal d(0.3, 0.9);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance(s, [&](double x) { return d.cdf(x); }) < bound);
  }
  SECTION("hurdle lognormal, mixed CDF with atom") {
    const HurdleLognormal d(0.25, 0.0, 1.0);
    auto s = sample_n(Distribution(d), n, rng);
    CHECK(oracle::ks_distance_mixed(
              s, [&](double x) { return d.cdf(x); },
              [&](double x) { return x <= 0.0 ? 0.0 : d.cdf(x); }) < bound);
  }
}

TEST_CASE("hurdle sampler zero fraction") {
  SECTION("pure atom") {
    Rng rng(7);
    auto s = sample_n(Distribution(HurdleLognormal(1.0, 0.0, 1.0)), 100, rng);
    for (double v : s) REQUIRE(v == 0.0);
  }
  SECTION("no atom") {
    Rng rng(7);
    auto s = sample_n(Distribution(HurdleLognormal(0.0, 0.0, 1.0)), 100, rng);
    for (double v : s) REQUIRE(v > 0.0);
  }
  SECTION("atom frequency matches pi within four binomial standard errors") {
    Rng rng(99);
    const std::size_t n = 1000000;
    auto s = sample_n(Distribution(HurdleLognormal(0.3, 0.0, 1.0)), n, rng);
    std::size_t zeros = 0;
    for (double v : s) zeros += (v == 0.0) ? 1 : 0;
    const double frac = static_cast<double>(zeros) / static_cast<double>(n);
    CHECK(std::fabs(frac - 0.3) < 0.002);
  }
}

TEST_CASE("sampling is deterministic given the seed") {
  Rng a(123, 5), b(123, 5);
  const Distribution d = Gamma(1.7, 2.2);
  const auto sa = sample_n(d, 1000, a);
  const auto sb = sample_n(d, 1000, b);
  CHECK(sa == sb);
  Rng c(124, 5);
  CHECK(sample_n(d, 1000, c) != sa);
}

TEST_CASE("lognormal closure under products") {
  // product of independent lognormals is lognormal with summed mu and
  // summed sigma^2; KS between 1e6 product samples and direct samples
  Rng rng(31415);
  const std::size_t n = 1000000;
  const Lognormal a(0.2, 0.6), b(-0.4, 0.8);
  const Lognormal direct(0.2 - 0.4, std::sqrt(0.6 * 0.6 + 0.8 * 0.8));
  std::vector<double> prod(n), ref(n);
  Rng r1 = rng.split(1), r2 = rng.split(2), r3 = rng.split(3);
  for (std::size_t i = 0; i < n; ++i) prod[i] = a.sample(r1) * b.sample(r2);
  for (std::size_t i = 0; i < n; ++i) ref[i] = direct.sample(r3);
  CHECK(oracle::ks_two_sample(prod, ref) < 0.005);
}

TEST_CASE("suite dispatch works over the variant") {
  Rng rng(1);
  const Distribution d = Normal(0.0, 1.0);
  CHECK(log_pdf(d, 0.0) == Approx(-0.9189385332046727));
  CHECK(family_name(d) == "normal");
  CHECK(family_name(Distribution(HurdleLognormal(0.1, 0.0, 1.0))) ==
        "hurdle_lognormal");
  const auto s = sample_n(d, 10, rng);
  CHECK(s.size() == 10);
}
