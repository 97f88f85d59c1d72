#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dirlatent/data.hpp"
#include "dirlatent/errors.hpp"
#include "dirlatent/rng.hpp"
#include "testutil.hpp"

using namespace dirlatent;

namespace {

double mean_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += std::abs(a.at(i) - b.at(i));
    return s / static_cast<double>(a.size());
}

double mse(const VideoSequence& a, const VideoSequence& b) {
    REQUIRE(a.length() == b.length());
    double s = 0.0;
    int64_t n = 0;
    for (size_t r = 0; r < a.frames.size(); ++r) {
        for (int64_t i = 0; i < a.frames[r].size(); ++i) {
            const double d = a.frames[r].at(i) - b.frames[r].at(i);
            s += d * d;
        }
        n += a.frames[r].size();
    }
    return s / static_cast<double>(n);
}

bool bitwise_equal(const VideoSequence& a, const VideoSequence& b) {
    if (a.length() != b.length()) return false;
    for (size_t r = 0; r < a.frames.size(); ++r) {
        if (a.frames[r].shape() != b.frames[r].shape()) return false;
        for (int64_t i = 0; i < a.frames[r].size(); ++i) {
            if (a.frames[r].at(i) != b.frames[r].at(i)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("toy config validation rejects empty extents") {
    ToyConfig bad;
    bad.frames = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = ToyConfig{};
    bad.height = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    CHECK_NOTHROW(ToyConfig{}.validate());
}

TEST_CASE("toy sequences are deterministic, in range, and correctly sized") {
    ToyConfig cfg;
    cfg.frames = 6;
    Rng r1(11), r2(11), r3(12);
    const VideoSequence a = data::generate_toy_sequence(cfg, r1);
    const VideoSequence b = data::generate_toy_sequence(cfg, r2);
    const VideoSequence c = data::generate_toy_sequence(cfg, r3);

    CHECK(a.length() == 6);
    CHECK(a.height() == 64);
    CHECK(a.width() == 64);
    CHECK(a.channels() == 3);
    CHECK_NOTHROW(a.validate());  // extents uniform, values in [0, 1]
    CHECK(bitwise_equal(a, b));
    CHECK_FALSE(bitwise_equal(a, c));
}

TEST_CASE("toy frames have structure and smooth motion") {
    ToyConfig cfg;
    cfg.frames = 8;
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        CAPTURE(seed);
        Rng rng(seed);
        const VideoSequence v = data::generate_toy_sequence(cfg, rng);
        for (const Tensor& f : v.frames) {
            const auto d = f.data();
            const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
            CHECK(*hi - *lo > 0.3);  // the pattern is not a flat field
        }
        for (size_t r = 1; r < v.frames.size(); ++r) {
            CHECK(mean_abs_diff(v.frames[r - 1], v.frames[r]) < 0.2);
        }
    }
}

TEST_CASE("degradation config validation") {
    DegradeConfig dc;
    CHECK_NOTHROW(dc.validate());
    dc.blur_sigma_min = -0.5;
    CHECK_THROWS_AS(dc.validate(), ContractError);
    dc = DegradeConfig{};
    dc.blur_sigma_max = 0.5;  // max below min
    CHECK_THROWS_AS(dc.validate(), ContractError);
    dc = DegradeConfig{};
    dc.down_factors = {};
    CHECK_THROWS_AS(dc.validate(), ContractError);
    dc = DegradeConfig{};
    dc.down_factors = {0};
    CHECK_THROWS_AS(dc.validate(), ContractError);
    dc = DegradeConfig{};
    dc.quant_levels = {1};  // one level cannot represent a signal
    CHECK_THROWS_AS(dc.validate(), ContractError);
}

TEST_CASE("zero-strength degradation is an identity up to 8-bit quantization") {
    ToyConfig cfg;
    cfg.frames = 4;
    Rng rng(5);
    const VideoSequence clean = data::generate_toy_sequence(cfg, rng);

    DegradeConfig dc;
    dc.blur_sigma_min = dc.blur_sigma_max = 0.0;
    dc.down_factors = {1};
    dc.noise_sigma_min = dc.noise_sigma_max = 0.0;
    dc.quant_levels = {256};
    Rng drng(7);
    const VideoSequence out = data::degrade_bfr(clean, dc, drng);
    REQUIRE(out.length() == clean.length());
    for (size_t r = 0; r < out.frames.size(); ++r) {
        for (int64_t i = 0; i < out.frames[r].size(); ++i) {
            CHECK(std::abs(out.frames[r].at(i) - clean.frames[r].at(i)) <= 1.0 / 255.0);
        }
    }
}

TEST_CASE("default degradation reduces fidelity and is seed-reproducible") {
    ToyConfig cfg;
    cfg.frames = 4;
    Rng rng(6);
    const VideoSequence clean = data::generate_toy_sequence(cfg, rng);

    DegradeConfig dc;  // defaults: blur 1-3, down {2,4}, noise up to 0.05, coarse levels
    Rng d1(21), d2(21), d3(22);
    const VideoSequence a = data::degrade_bfr(clean, dc, d1);
    const VideoSequence b = data::degrade_bfr(clean, dc, d2);
    const VideoSequence c = data::degrade_bfr(clean, dc, d3);

    CHECK(a.height() == clean.height());  // upsampled back to source extents
    CHECK(a.width() == clean.width());
    CHECK_NOTHROW(a.validate());
    CHECK(bitwise_equal(a, b));
    CHECK_FALSE(bitwise_equal(a, c));
    // Any nonzero degradation must push the error above the lossless floor.
    CHECK(mse(clean, a) > 1e-10);
    CHECK(mse(clean, a) > mse(clean, clean));
}

TEST_CASE("degradation parameters stay fixed within a clip") {
    // A static input through a blur+downsample-only pipeline must stay static:
    // if strengths were redrawn per frame the frames would diverge.
    ToyConfig cfg;
    cfg.frames = 1;
    Rng rng(9);
    const Tensor frame = data::generate_toy_sequence(cfg, rng).frames[0];
    VideoSequence still;
    still.frames = {frame, frame, frame, frame};

    DegradeConfig dc;
    dc.noise_sigma_min = dc.noise_sigma_max = 0.0;
    Rng drng(31);
    const VideoSequence out = data::degrade_bfr(still, dc, drng);
    for (size_t r = 1; r < out.frames.size(); ++r) {
        for (int64_t i = 0; i < out.frames[r].size(); ++i) {
            CHECK(out.frames[r].at(i) == out.frames[0].at(i));
        }
    }
}

TEST_CASE("blur-only degradation attenuates high-frequency content") {
    std::vector<double> checker(64 * 64 * 3);
    for (int64_t h = 0; h < 64; ++h) {
        for (int64_t w = 0; w < 64; ++w) {
            const double v = ((h + w) % 2 == 0) ? 1.0 : 0.0;
            for (int64_t c = 0; c < 3; ++c) checker[static_cast<size_t>((h * 64 + w) * 3 + c)] = v;
        }
    }
    VideoSequence v;
    v.frames = {Tensor({64, 64, 3}, checker)};

    DegradeConfig dc;
    dc.blur_sigma_min = dc.blur_sigma_max = 2.0;
    dc.down_factors = {1};
    dc.noise_sigma_min = dc.noise_sigma_max = 0.0;
    dc.quant_levels = {256};
    Rng drng(3);
    const VideoSequence out = data::degrade_bfr(v, dc, drng);

    auto variance = [](const Tensor& t) {
        double m = 0.0;
        for (int64_t i = 0; i < t.size(); ++i) m += t.at(i);
        m /= static_cast<double>(t.size());
        double s = 0.0;
        for (int64_t i = 0; i < t.size(); ++i) s += (t.at(i) - m) * (t.at(i) - m);
        return s / static_cast<double>(t.size());
    };
    CHECK(variance(out.frames[0]) < 0.2 * variance(v.frames[0]));
}

TEST_CASE("grayscale conversion uses the fixed luma weights") {
    VideoSequence red;
    red.frames = {Tensor({2, 2, 3}, std::vector<double>{1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0})};
    const VideoSequence g = data::to_grayscale(red);
    for (int64_t i = 0; i < g.frames[0].size(); ++i) CHECK(g.frames[0].at(i) == 0.299);

    VideoSequence green;
    green.frames = {Tensor({1, 1, 3}, std::vector<double>{0, 1, 0})};
    CHECK(data::to_grayscale(green).frames[0].at(2) == 0.587);

    VideoSequence blue;
    blue.frames = {Tensor({1, 1, 3}, std::vector<double>{0, 0, 1})};
    CHECK(data::to_grayscale(blue).frames[0].at(0) == 0.114);
}

TEST_CASE("grayscale conversion is a projection") {
    ToyConfig cfg;
    cfg.frames = 3;
    Rng rng(14);
    const VideoSequence v = data::generate_toy_sequence(cfg, rng);
    const VideoSequence g1 = data::to_grayscale(v);
    const VideoSequence g2 = data::to_grayscale(g1);
    for (size_t r = 0; r < g1.frames.size(); ++r) {
        const auto a = g1.frames[r].data();
        const auto b = g2.frames[r].data();
        for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
        // All three channels carry the same luma.
        for (size_t i = 0; i < a.size(); i += 3) {
            CHECK(a[i] == a[i + 1]);
            CHECK(a[i] == a[i + 2]);
        }
    }
}

TEST_CASE("grayscale conversion rejects non-rgb input") {
    VideoSequence v;
    v.frames = {Tensor::zeros({2, 2, 1})};
    CHECK_THROWS_AS(data::to_grayscale(v), ContractError);
}

TEST_CASE("brush masks are binary, reproducible, and bounded in coverage") {
    int64_t distinct = 0;
    Tensor prev = Tensor::zeros({1});
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed);
        const Tensor m = data::make_mask_brush(64, 64, rng);
        REQUIRE(m.shape() == Shape{64, 64});
        double on = 0.0;
        for (int64_t i = 0; i < m.size(); ++i) {
            const double v = m.at(i);
            REQUIRE((v == 0.0 || v == 1.0));
            on += v;
        }
        const double coverage = on / static_cast<double>(m.size());
        CAPTURE(seed);
        CHECK(coverage >= 0.05);
        CHECK(coverage <= 0.40);
        if (seed > 0 && m.shape() == prev.shape()) {
            for (int64_t i = 0; i < m.size(); ++i) {
                if (m.at(i) != prev.at(i)) {
                    ++distinct;
                    break;
                }
            }
        }
        prev = m;
    }
    CHECK(distinct > 900);  // masks vary across seeds

    Rng r1(77), r2(77);
    const Tensor a = data::make_mask_brush(64, 64, r1);
    const Tensor b = data::make_mask_brush(64, 64, r2);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a.at(i) == b.at(i));
}
