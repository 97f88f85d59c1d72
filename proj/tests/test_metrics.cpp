#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dirlatent/data.hpp"
#include "dirlatent/errors.hpp"
#include "dirlatent/metrics.hpp"
#include "dirlatent/rng.hpp"
#include "testutil.hpp"

using namespace dirlatent;

namespace {

VideoSequence random_video(Rng& rng, int64_t frames, int64_t h, int64_t w, int64_t c = 3) {
    VideoSequence v;
    for (int64_t r = 0; r < frames; ++r) {
        v.frames.emplace_back(Shape{h, w, c}, testutil::rand_vec(rng, h * w * c, 0.0, 1.0));
    }
    return v;
}

VideoSequence uniform_video(int64_t frames, int64_t h, int64_t w, double value) {
    VideoSequence v;
    for (int64_t r = 0; r < frames; ++r) v.frames.push_back(Tensor::full({h, w, 3}, value));
    return v;
}

VideoSequence shift_video(const VideoSequence& v, double delta) {
    VideoSequence out;
    out.fps = v.fps;
    for (const Tensor& f : v.frames) {
        std::vector<double> px(f.data().begin(), f.data().end());
        for (double& p : px) p = std::min(1.0, std::max(0.0, p + delta));
        out.frames.emplace_back(f.shape(), std::move(px));
    }
    return out;
}

// Direct per-window structural-similarity reference: explicit 11x11 Gaussian
// weights, one double loop per window position, no separable shortcuts.
double ssim_naive(const VideoSequence& av, const VideoSequence& bv) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5, kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    double kernel[kWin][kWin];
    double ksum = 0.0;
    for (int u = 0; u < kWin; ++u) {
        for (int v = 0; v < kWin; ++v) {
            const double du = u - 5.0, dv = v - 5.0;
            kernel[u][v] = std::exp(-(du * du + dv * dv) / (2.0 * kSigma * kSigma));
            ksum += kernel[u][v];
        }
    }
    for (auto& row : kernel) {
        for (double& k : row) k /= ksum;
    }

    auto luma = [](const Tensor& f) {
        const int64_t h = f.dim(0), w = f.dim(1), c = f.dim(2);
        std::vector<double> out(static_cast<size_t>(h * w));
        for (int64_t i = 0; i < h * w; ++i) {
            const auto d = f.data();
            out[static_cast<size_t>(i)] =
                c == 3 ? 0.299 * d[static_cast<size_t>(i * 3)] + 0.587 * d[static_cast<size_t>(i * 3 + 1)] +
                             0.114 * d[static_cast<size_t>(i * 3 + 2)]
                       : d[static_cast<size_t>(i)];
        }
        return out;
    };

    double total = 0.0;
    for (size_t r = 0; r < av.frames.size(); ++r) {
        const int64_t h = av.frames[r].dim(0), w = av.frames[r].dim(1);
        const std::vector<double> x = luma(av.frames[r]);
        const std::vector<double> y = luma(bv.frames[r]);
        double acc = 0.0;
        int64_t count = 0;
        for (int64_t i = 0; i + kWin <= h; ++i) {
            for (int64_t j = 0; j + kWin <= w; ++j) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int u = 0; u < kWin; ++u) {
                    for (int v = 0; v < kWin; ++v) {
                        const double xv = x[static_cast<size_t>((i + u) * w + (j + v))];
                        const double yv = y[static_cast<size_t>((i + u) * w + (j + v))];
                        mx += kernel[u][v] * xv;
                        my += kernel[u][v] * yv;
                        sxx += kernel[u][v] * xv * xv;
                        syy += kernel[u][v] * yv * yv;
                        sxy += kernel[u][v] * xv * yv;
                    }
                }
                const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
                acc += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                       ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(av.frames.size());
}

}  // namespace

TEST_CASE("psnr hits the cap on identical inputs and 20 dB at offset 0.1") {
    Rng rng(1);
    const VideoSequence v = random_video(rng, 2, 16, 16);
    CHECK(metrics::psnr(v, v) == 100.0);

    const VideoSequence a = uniform_video(2, 16, 16, 0.4);
    const VideoSequence b = uniform_video(2, 16, 16, 0.5);
    CHECK(metrics::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("psnr is symmetric and strictly decreases with added noise") {
    Rng rng(2);
    const VideoSequence truth = random_video(rng, 3, 12, 12);
    VideoSequence mild = truth, strong = truth;
    Rng n1(3), n2(3);
    for (Tensor& f : mild.frames) {
        std::vector<double> px(f.data().begin(), f.data().end());
        for (double& p : px) p = std::min(1.0, std::max(0.0, p + 0.01 * n1.normal()));
        f = Tensor(f.shape(), std::move(px));
    }
    for (Tensor& f : strong.frames) {
        std::vector<double> px(f.data().begin(), f.data().end());
        for (double& p : px) p = std::min(1.0, std::max(0.0, p + 0.05 * n2.normal()));
        f = Tensor(f.shape(), std::move(px));
    }
    const double p_mild = metrics::psnr(truth, mild);
    const double p_strong = metrics::psnr(truth, strong);
    CHECK(p_mild < 100.0);
    CHECK(p_strong < p_mild);
    CHECK(metrics::psnr(mild, truth) == doctest::Approx(p_mild).epsilon(1e-12));
}

TEST_CASE("psnr rejects mismatched sequences") {
    Rng rng(4);
    const VideoSequence a = random_video(rng, 2, 8, 8);
    const VideoSequence b = random_video(rng, 2, 8, 10);
    const VideoSequence c = random_video(rng, 3, 8, 8);
    CHECK_THROWS_AS(metrics::psnr(a, b), ContractError);
    CHECK_THROWS_AS(metrics::psnr(a, c), ContractError);
}

TEST_CASE("ssim is exactly one on identical inputs") {
    Rng rng(5);
    const VideoSequence v = random_video(rng, 2, 16, 16);
    CHECK(metrics::ssim(v, v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim on two constant images reduces to the luminance term") {
    const VideoSequence a = uniform_video(1, 16, 16, 0.2);
    const VideoSequence b = uniform_video(1, 16, 16, 0.8);
    const double c1 = 0.01 * 0.01;
    const double expected = (2 * 0.2 * 0.8 + c1) / (0.2 * 0.2 + 0.8 * 0.8 + c1);
    CHECK(metrics::ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(metrics::ssim(a, b) < 1.0);
}

TEST_CASE("ssim matches the direct per-window reference") {
    Rng rng(6);
    for (int pair = 0; pair < 5; ++pair) {
        CAPTURE(pair);
        const VideoSequence a = random_video(rng, 1, 32, 32);
        VideoSequence b = random_video(rng, 1, 32, 32);
        // Mix of correlated and independent content exercises all terms.
        if (pair % 2 == 0) b = shift_video(a, 0.07 * (pair + 1));
        const double got = metrics::ssim(a, b);
        const double want = ssim_naive(a, b);
        CHECK(std::abs(got - want) < 1e-6);
        CHECK(metrics::ssim(b, a) == doctest::Approx(got).epsilon(1e-9));
        CHECK(got >= -1.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("ssim on structured toy clips") {
    ToyConfig cfg;
    cfg.frames = 2;
    Rng rng(7);
    const VideoSequence clean = data::generate_toy_sequence(cfg, rng);
    DegradeConfig dc;
    Rng drng(8);
    const VideoSequence dirty = data::degrade_bfr(clean, dc, drng);
    const double s = metrics::ssim(clean, dirty);
    CHECK(std::abs(metrics::ssim(clean, dirty) - ssim_naive(clean, dirty)) < 1e-6);
    CHECK(s < 1.0);
    CHECK(s > 0.0);  // same scene, degraded: similar but not identical
}

TEST_CASE("ssim rejects frames smaller than its window") {
    Rng rng(9);
    const VideoSequence small = random_video(rng, 1, 10, 16);
    CHECK_THROWS_AS(metrics::ssim(small, small), ContractError);
}

TEST_CASE("flicker is zero for perfect or statically biased predictions") {
    Rng rng(10);
    const VideoSequence truth = random_video(rng, 4, 8, 8);
    CHECK(metrics::flicker(truth, truth) == 0.0);
    const VideoSequence biased = shift_video(truth, 0.0);  // same content
    CHECK(metrics::flicker(biased, truth) == 0.0);

    // A constant offset never clips if the payload leaves headroom.
    VideoSequence head = truth;
    for (Tensor& f : head.frames) {
        std::vector<double> px(f.data().begin(), f.data().end());
        for (double& p : px) p = 0.5 * p;  // into [0, 0.5]
        f = Tensor(f.shape(), std::move(px));
    }
    const VideoSequence offset = shift_video(head, 0.25);
    CHECK(metrics::flicker(offset, head) <= 1e-12);
}

TEST_CASE("flicker scores alternating contamination at its amplitude step") {
    Rng rng(11);
    VideoSequence truth = random_video(rng, 6, 8, 8);
    for (Tensor& f : truth.frames) {
        std::vector<double> px(f.data().begin(), f.data().end());
        for (double& p : px) p = 0.2 + 0.6 * p;  // keep ±0.1 inside [0, 1]
        f = Tensor(f.shape(), std::move(px));
    }
    VideoSequence pred = truth;
    for (size_t r = 0; r < pred.frames.size(); ++r) {
        const double delta = (r % 2 == 0) ? 0.1 : -0.1;
        std::vector<double> px(pred.frames[r].data().begin(), pred.frames[r].data().end());
        for (double& p : px) p += delta;
        pred.frames[r] = Tensor(pred.frames[r].shape(), std::move(px));
    }
    CHECK(metrics::flicker(pred, truth) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("flicker requires at least two frames and equal shapes") {
    Rng rng(12);
    const VideoSequence one = random_video(rng, 1, 8, 8);
    CHECK_THROWS_AS(metrics::flicker(one, one), ContractError);
    const VideoSequence a = random_video(rng, 3, 8, 8);
    const VideoSequence b = random_video(rng, 3, 8, 10);
    CHECK_THROWS_AS(metrics::flicker(a, b), ContractError);
}

TEST_CASE("metric ranges hold on arbitrary valid inputs") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const VideoSequence a = random_video(rng, 3, 16, 16);
        const VideoSequence b = random_video(rng, 3, 16, 16);
        const double p = metrics::psnr(a, b);
        const double s = metrics::ssim(a, b);
        const double f = metrics::flicker(a, b);
        CHECK(p >= 0.0);
        CHECK(p <= 100.0);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
        CHECK(f >= 0.0);
    }
}
