#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dirlatent/rng.hpp"
#include "dirlatent/special.hpp"
#include "oracles.hpp"

using namespace dirlatent;
namespace sp = dirlatent::special;

TEST_CASE("log_gamma fixed points") {
    CHECK(sp::log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sp::log_gamma(2.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sp::log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-13));
    CHECK(sp::log_gamma(0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-13));
    CHECK_THROWS_AS(sp::log_gamma(0.0), DomainError);
    CHECK_THROWS_AS(sp::log_gamma(-3.0), DomainError);
}

TEST_CASE("log_gamma matches the Stirling-series reference across the domain") {
    for (double x = 1e-3; x <= 1e3; x *= 1.37) {
        CAPTURE(x);
        CHECK(std::fabs(sp::log_gamma(x) - oracles::log_gamma_ref(x)) < 1e-10);
    }
}

TEST_CASE("log_gamma is convex on [0.1, 50]") {
    const double h = 0.05;
    for (double x = 0.1; x <= 50.0; x += 0.37) {
        const double second_diff =
            sp::log_gamma(x + h) - 2.0 * sp::log_gamma(x + h / 2.0) + sp::log_gamma(x);
        CAPTURE(x);
        CHECK(second_diff >= -1e-9);
    }
}

TEST_CASE("digamma(1) is minus the Euler-Mascheroni constant") {
    const double gamma = oracles::euler_mascheroni_ref();
    // Anchor the oracle itself to the published double value first.
    CHECK(gamma == doctest::Approx(0.5772156649015329).epsilon(1e-13));
    CHECK(sp::digamma(1.0) == doctest::Approx(-gamma).epsilon(1e-12));
    // psi(1/2) = -gamma - 2 ln 2.
    CHECK(sp::digamma(0.5) ==
          doctest::Approx(-gamma - 2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("digamma recurrence psi(x+1) = psi(x) + 1/x") {
    for (double x : {0.1, 0.001, 0.7, 1.0, 5.9, 10.0, 100.0}) {
        CAPTURE(x);
        CHECK(std::fabs(sp::digamma(x + 1.0) - sp::digamma(x) - 1.0 / x) < 1e-9);
    }
    CHECK(sp::digamma(2.0) == doctest::Approx(sp::digamma(1.0) + 1.0).epsilon(1e-13));
}

TEST_CASE("digamma matches finite differences of log_gamma at 3.7") {
    const double h = 1e-6;
    const double fd = (sp::log_gamma(3.7 + h) - sp::log_gamma(3.7 - h)) / (2.0 * h);
    CHECK(std::fabs(sp::digamma(3.7) - fd) < 1e-6);
}

TEST_CASE("digamma matches the independent reference on [0.5, 1e3]") {
    for (double x = 0.5; x <= 1e3; x *= 1.31) {
        CAPTURE(x);
        CHECK(std::fabs(sp::digamma(x) - oracles::digamma_ref(x)) < 5e-9);
    }
    CHECK_THROWS_AS(sp::digamma(0.0), DomainError);
}

TEST_CASE("trigamma hits pi^2/6 and pi^2/2 and obeys its recurrence") {
    const double pi2 = M_PI * M_PI;
    CHECK(sp::trigamma(1.0) == doctest::Approx(pi2 / 6.0).epsilon(1e-12));
    CHECK(sp::trigamma(0.5) == doctest::Approx(pi2 / 2.0).epsilon(1e-12));
    for (double x : {0.05, 0.3, 1.7, 6.0, 42.0, 500.0}) {
        CAPTURE(x);
        CHECK(std::fabs(sp::trigamma(x) - sp::trigamma(x + 1.0) - 1.0 / (x * x)) <
              1e-9 * std::max(1.0, 1.0 / (x * x)));
    }
    CHECK_THROWS_AS(sp::trigamma(-1.0), DomainError);
}

TEST_CASE("trigamma is the derivative of digamma") {
    // digamma is independently verified above, so differencing it checks
    // trigamma without sharing series coefficients at matched order.
    for (double x : {0.2, 0.9, 2.3, 7.7, 31.0, 400.0}) {
        const double h = 1e-5 * std::max(1.0, x);
        const double fd = (sp::digamma(x + h) - sp::digamma(x - h)) / (2.0 * h);
        CAPTURE(x);
        CHECK(std::fabs(sp::trigamma(x) - fd) < 1e-5 * std::max(1.0, sp::trigamma(x)));
    }
}

TEST_CASE("reg_inc_gamma_p closed forms and edge cases") {
    for (double x : {0.0, 0.1, 1.0, 3.5, 20.0}) {
        CAPTURE(x);
        CHECK(sp::reg_inc_gamma_p(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
    }
    CHECK(sp::reg_inc_gamma_p(7.3, 0.0) == 0.0);
    CHECK(sp::reg_inc_gamma_p(2.0, 1e6) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(sp::reg_inc_gamma_p(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(sp::reg_inc_gamma_p(1.0, -0.5), DomainError);
}

TEST_CASE("reg_inc_gamma_p matches the quadrature reference") {
    CHECK(std::fabs(sp::reg_inc_gamma_p(2.5, 3.1) - oracles::reg_inc_gamma_p_ref(2.5, 3.1)) <
          1e-9);
    for (double a : {0.3, 1.0, 2.5, 7.0, 40.0}) {
        for (double x : {0.05, 0.5, 1.0, 2.0, 5.0, 12.0, 60.0}) {
            CAPTURE(a);
            CAPTURE(x);
            CHECK(std::fabs(sp::reg_inc_gamma_p(a, x) - oracles::reg_inc_gamma_p_ref(a, x)) <
                  1e-9);
        }
    }
}

TEST_CASE("reg_inc_gamma_p is nondecreasing in x and bounded in [0,1]") {
    for (double a : {0.2, 1.0, 3.7, 25.0}) {
        double prev = 0.0;
        for (double x = 0.0; x <= 80.0; x += 0.173) {
            const double v = sp::reg_inc_gamma_p(a, x);
            CAPTURE(a);
            CAPTURE(x);
            CHECK(v >= prev - 1e-13);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            prev = v;
        }
    }
}

TEST_CASE("inv_reg_inc_gamma_p round-trips through the forward map") {
    for (double a : {0.15, 0.7, 1.0, 3.3, 17.0}) {
        for (double x : {0.02, 0.4, 1.1, 4.0, 22.0}) {
            const double p = sp::reg_inc_gamma_p(a, x);
            if (p >= 1.0) continue;  // saturated in double precision
            const double back = sp::inv_reg_inc_gamma_p(a, p);
            CAPTURE(a);
            CAPTURE(x);
            if (p > 1e-9 && p < 1.0 - 1e-9) {
                CHECK(std::fabs(back - x) < 1e-8 * std::max(1.0, x));
            } else {
                // Deep in a tail the flat CDF cannot encode x to full
                // precision; require consistency in probability instead.
                CHECK(std::fabs(sp::reg_inc_gamma_p(a, back) - p) < 1e-11);
            }
        }
    }
    CHECK(sp::inv_reg_inc_gamma_p(2.0, 0.0) == 0.0);
    CHECK_THROWS_AS(sp::inv_reg_inc_gamma_p(2.0, 1.0), DomainError);
}

TEST_CASE("sample_gamma moments match Gamma(2,1)") {
    Rng rng(2024);
    const int n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = sp::sample_gamma(2.0, rng);
        sum += g;
        sumsq += g * g;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean - 2.0) < 0.01);
    CHECK(std::fabs(var - 2.0) < 0.05);
}

TEST_CASE("sample_gamma at shape 0.5 agrees with its own CDF (Kolmogorov distance)") {
    Rng rng(7);
    const int n = 100000;
    std::vector<double> draws(n);
    for (auto& d : draws) d = sp::sample_gamma(0.5, rng);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double cdf = sp::reg_inc_gamma_p(0.5, draws[static_cast<size_t>(i)]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::fabs(cdf - lo), std::fabs(cdf - hi)});
    }
    CHECK(ks < 0.005);
}

TEST_CASE("sample_gamma streams are reproducible and positive") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) {
        const double shape = 0.05 + 3.0 * (i % 7);
        const double da = sp::sample_gamma(shape, a);
        CHECK(da == sp::sample_gamma(shape, b));
        CHECK(da > 0.0);
    }
    CHECK_THROWS_AS(sp::sample_gamma(0.0, a), DomainError);
}

TEST_CASE("inverse-CDF draws follow the same law as the sampler") {
    // n uniform strata pushed through inv_reg_inc_gamma_p must reproduce the
    // Gamma CDF; this ties the two sampling paths together.
    for (double a : {0.4, 1.0, 2.7}) {
        const int n = 2000;
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            const double u = (static_cast<double>(i) + 0.5) / n;
            const double x = sp::inv_reg_inc_gamma_p(a, u);
            worst = std::max(worst, std::fabs(sp::reg_inc_gamma_p(a, x) - u));
        }
        CAPTURE(a);
        CHECK(worst < 1e-10);
    }
}
