#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dirlatent {

// Deterministic random stream. Wraps mt19937_64 with fixed uniform/normal
// mappings so a seed pins the exact draw sequence on a platform. An Rng is
// caller-owned and never shared between threads; derive per-worker streams
// with split().
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; caches the second variate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Integer in [0, n); n > 0.
    int64_t below(int64_t n) {
        const auto i = static_cast<int64_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    // Independent stream keyed by tag (per clip, per worker).
    Rng split(uint64_t tag) {
        return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dirlatent
