#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dirlatent/dirichlet.hpp"
#include "dirlatent/ops.hpp"
#include "dirlatent/rng.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace dirlatent;
namespace dd = dirlatent::dirichlet;

TEST_CASE("log_pdf of the flat Dirichlet on the 2-simplex is log 2") {
    // Dir(1,1,1) is uniform over a region of area 1/2, so the density is 2.
    for (auto w : {std::vector<double>{0.2, 0.3, 0.5}, {1.0 / 3, 1.0 / 3, 1.0 / 3},
                   {0.9, 0.05, 0.05}}) {
        CHECK(dd::log_pdf(w, std::vector<double>{1.0, 1.0, 1.0}) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("log_pdf matches the reference density") {
    CHECK(dd::log_pdf(std::vector<double>{0.5, 0.5}, std::vector<double>{2.0, 2.0}) ==
          doctest::Approx(std::log(1.5)).epsilon(1e-12));
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a = {rng.uniform(0.2, 4.0), rng.uniform(0.2, 4.0),
                                 rng.uniform(0.2, 4.0)};
        std::vector<double> w = dd::sample(a, rng);
        CHECK(dd::log_pdf(w, a) ==
              doctest::Approx(oracles::dirichlet_log_pdf_ref(w, a)).epsilon(1e-10));
    }
}

TEST_CASE("log_pdf boundary handling returns -inf, never NaN") {
    const double v = dd::log_pdf(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 2.0});
    CHECK(std::isinf(v));
    CHECK(v < 0.0);
    const double v2 = dd::log_pdf(std::vector<double>{0.0, 1.0}, std::vector<double>{3.0, 2.0});
    CHECK(std::isinf(v2));
    CHECK(v2 < 0.0);
    // alpha_k = 1 on a zero coordinate contributes nothing (finite density).
    CHECK(std::isfinite(
        dd::log_pdf(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 2.0})));
    CHECK_THROWS_AS(dd::log_pdf(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, -1.0}),
                    ContractError);
    CHECK_THROWS_AS(dd::log_pdf(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 1, 1}),
                    ContractError);
}

TEST_CASE("pdf integrates to 1 over the 2-simplex") {
    for (auto a : {std::vector<double>{1.0, 1.0, 1.0}, {2.0, 3.0, 1.5}, {0.5, 2.0, 1.2}}) {
        const double total = oracles::simplex3_integral([&](const std::vector<double>& w) {
            return std::exp(dd::log_pdf(w, a));
        });
        CAPTURE(a[0]);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("kl_divergence of identical distributions is zero") {
    const std::vector<double> a = {1.3, 0.7, 2.0};
    CHECK(dd::kl_divergence(a, a) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(dd::kl_divergence(a, std::vector<double>{1.0, 1.0}), ContractError);
}

TEST_CASE("kl_divergence matches a Monte-Carlo estimate") {
    const std::vector<double> q = {2.0, 2.0};
    const std::vector<double> p = {1.0, 1.0};
    Rng rng(42);
    const int n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto w = dd::sample(q, rng);
        const double d =
            oracles::dirichlet_log_pdf_ref(w, q) - oracles::dirichlet_log_pdf_ref(w, p);
        sum += d;
        sumsq += d * d;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sumsq / n - mc * mc) / n);
    CHECK(std::fabs(dd::kl_divergence(q, p) - mc) < 3.0 * se);
}

TEST_CASE("kl_divergence matches simplex quadrature") {
    const std::vector<double> q = {0.5, 1.5, 3.0};
    const std::vector<double> p = {1.0, 1.0, 1.0};
    const double quad = oracles::simplex3_integral([&](const std::vector<double>& w) {
        // Deep quadrature nodes can underflow a coordinate to exactly 0;
        // q has concentration > 1 there, so the integrand's limit is 0.
        if (w[0] <= 0.0 || w[1] <= 0.0 || w[2] <= 0.0) return 0.0;
        const double lq = oracles::dirichlet_log_pdf_ref(w, q);
        const double lp = oracles::dirichlet_log_pdf_ref(w, p);
        return std::exp(lq) * (lq - lp);
    });
    CHECK(dd::kl_divergence(q, p) == doctest::Approx(quad).epsilon(1e-3));
}

TEST_CASE("kl_divergence is nonnegative and vanishes only at equality") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> q(4), p(4);
        for (int k = 0; k < 4; ++k) {
            q[static_cast<size_t>(k)] = rng.uniform(0.05, 8.0);
            p[static_cast<size_t>(k)] = rng.uniform(0.05, 8.0);
        }
        const double kl = dd::kl_divergence(q, p);
        CHECK(kl >= -1e-9);
    }
    const std::vector<double> base = {1.0, 2.0, 3.0};
    std::vector<double> nudged = base;
    nudged[0] += 1e-3;
    CHECK(dd::kl_divergence(base, base) < 1e-9);
    CHECK(dd::kl_divergence(nudged, base) > 1e-9);
}

TEST_CASE("mean is alpha over its sum") {
    const auto m = dd::mean(std::vector<double>{1.0, 1.0, 1.0});
    CHECK(m[0] == doctest::Approx(1.0 / 3.0));
    const auto m2 = dd::mean(std::vector<double>{2.0, 6.0});
    CHECK(m2[0] == doctest::Approx(0.25));
    CHECK(m2[1] == doctest::Approx(0.75));
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(6);
        for (auto& v : a) v = rng.uniform(0.01, 5.0);
        const auto mm = dd::mean(a);
        const auto am = std::max_element(a.begin(), a.end()) - a.begin();
        const auto wm = std::max_element(mm.begin(), mm.end()) - mm.begin();
        CHECK(am == wm);
    }
}

TEST_CASE("samples lie on the simplex and concentrate at large alpha") {
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const auto w = dd::sample(std::vector<double>{1000.0, 1000.0}, rng);
        CHECK(std::fabs(w[0] + w[1] - 1.0) < 1e-9);
        CHECK(w[0] >= 0.0);
        CHECK(std::fabs(w[0] - 0.5) < 0.05);
    }
}

TEST_CASE("sample mean matches alpha / sum(alpha)") {
    Rng rng(11);
    const std::vector<double> a = {2.0, 3.0, 5.0};
    std::vector<double> acc(3, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto w = dd::sample(a, rng);
        CHECK(std::fabs(w[0] + w[1] + w[2] - 1.0) < 1e-9);
        for (int k = 0; k < 3; ++k) acc[static_cast<size_t>(k)] += w[static_cast<size_t>(k)];
    }
    CHECK(std::fabs(acc[0] / n - 0.2) < 0.01);
    CHECK(std::fabs(acc[1] / n - 0.3) < 0.01);
    CHECK(std::fabs(acc[2] / n - 0.5) < 0.01);
}

TEST_CASE("expected max weight decreases as symmetric alpha grows") {
    // Small concentrations put nearly all mass on few codebook items; large
    // ones spread it evenly.
    Rng rng(13);
    const int n = 100000, dim = 16;
    double prev = 2.0;
    for (double a : {0.1, 1.0, 10.0}) {
        const std::vector<double> alpha(dim, a);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto w = dd::sample(alpha, rng);
            acc += *std::max_element(w.begin(), w.end());
        }
        const double mean_max = acc / n;
        CAPTURE(a);
        CHECK(mean_max < prev);
        prev = mean_max;
    }
}

TEST_CASE("sample_on_tape draws the same law as the fast sampler") {
    Rng rng(21);
    const int n = 20000;
    // Moments of the first component of Dir(1.5, 2.5): Beta(1.5, 2.5).
    const double a = 1.5, b = 2.5;
    const double want_mean = a / (a + b);
    const double want_var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
    std::vector<double> alpha_rows(2 * n);
    for (int i = 0; i < n; ++i) {
        alpha_rows[static_cast<size_t>(2 * i)] = a;
        alpha_rows[static_cast<size_t>(2 * i + 1)] = b;
    }
    const Tensor w = dd::sample_on_tape(Tensor({n, 2}, alpha_rows), rng);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = w.at(2 * i);
        CHECK(std::fabs(v + w.at(2 * i + 1) - 1.0) < 1e-9);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean - want_mean) < 0.005);
    CHECK(std::fabs(var - want_var) < 0.003);
}

TEST_CASE("sample_on_tape is reproducible for a fixed seed") {
    const Tensor alpha({3, 4}, std::vector<double>(12, 0.8));
    Rng r1(55), r2(55);
    const Tensor w1 = dd::sample_on_tape(alpha, r1);
    const Tensor w2 = dd::sample_on_tape(alpha, r2);
    for (int64_t i = 0; i < w1.size(); ++i) CHECK(w1.at(i) == w2.at(i));
}

TEST_CASE("sample_on_tape gradient matches common-random-number finite differences") {
    // With the rng seed fixed, the draw is a smooth deterministic function of
    // alpha, so plain central differences of the whole op must agree with
    // the implicit-reparameterization backward pass.
    Rng rng(77);
    for (int trial = 0; trial < 3; ++trial) {
        const uint64_t seed = 1000 + static_cast<uint64_t>(trial);
        testutil::check_grad(
            rng, {Shape{2, 3}},
            [seed](const std::vector<Tensor>& in) {
                Rng local(seed);
                return dd::sample_on_tape(in[0], local);
            },
            {{0.4, 3.0}}, 1e-3);
    }
}

TEST_CASE("pathwise gradient of the expected first weight matches the analytic mean") {
    // E[w_1] = alpha_1 / sum(alpha); at alpha = [2, 2] the derivative wrt
    // alpha_1 is alpha_2 / sum^2 = 0.125.
    const int n = 100000;
    Rng rng(99);
    Tape tape;
    const Tensor alpha = tape.leaf({n, 2}, std::vector<double>(2 * n, 2.0));
    const Tensor w = dd::sample_on_tape(alpha, rng);
    // Average of the first column.
    std::vector<double> pick(2 * n, 0.0);
    for (int i = 0; i < n; ++i) pick[static_cast<size_t>(2 * i)] = 1.0 / n;
    tape.backward(ops::sum(ops::mul(w, Tensor({n, 2}, pick))));
    const auto g = tape.grad_of(alpha);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += g[static_cast<size_t>(2 * i)];
    // Each row contributes dE/dalpha_1 / n; the sum estimates the derivative.
    CHECK(std::fabs(acc - 0.125) < 0.05 * 0.125);
}

TEST_CASE("kl_to_symmetric_prior matches kl_divergence row by row") {
    Rng rng(3);
    const int rows = 5, n = 8;
    const auto av = testutil::rand_vec(rng, rows * n, 0.1, 4.0);
    const Tensor alpha({rows, n}, av);
    const Tensor kl = dd::kl_to_symmetric_prior(alpha, 0.5);
    CHECK(kl.shape() == Shape{rows});
    const std::vector<double> prior(n, 0.5);
    for (int r = 0; r < rows; ++r) {
        std::vector<double> row(av.begin() + r * n, av.begin() + (r + 1) * n);
        CHECK(kl.at(r) == doctest::Approx(dd::kl_divergence(row, prior)).epsilon(1e-12));
        CHECK(kl.at(r) >= -1e-9);
    }
}

TEST_CASE("kl_to_symmetric_prior gradient matches finite differences") {
    Rng rng(4);
    for (double prior : {0.1, 0.5, 2.0}) {
        testutil::check_grad(
            rng, {Shape{3, 5}},
            [prior](const std::vector<Tensor>& in) {
                return dd::kl_to_symmetric_prior(in[0], prior);
            },
            {{0.2, 4.0}});
    }
}
