#include "dirlatent/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "dirlatent/errors.hpp"

namespace dirlatent::metrics {

namespace {

void check_pair(const VideoSequence& a, const VideoSequence& b, const char* op) {
    a.validate();
    b.validate();
    if (a.length() != b.length()) {
        throw ContractError(std::string(op) + ": sequence lengths differ (" +
                            std::to_string(a.length()) + " vs " + std::to_string(b.length()) + ")");
    }
    if (a.frames[0].shape() != b.frames[0].shape()) {
        throw ContractError(std::string(op) + ": frame extents differ (" +
                            shape_str(a.frames[0].shape()) + " vs " +
                            shape_str(b.frames[0].shape()) + ")");
    }
}

std::vector<double> luma_plane(const Tensor& frame) {
    const int64_t h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
    const auto d = frame.data();
    std::vector<double> out(static_cast<size_t>(h * w));
    if (c == 3) {
        for (int64_t i = 0; i < h * w; ++i) {
            out[static_cast<size_t>(i)] = 0.299 * d[static_cast<size_t>(i * 3)] +
                                          0.587 * d[static_cast<size_t>(i * 3 + 1)] +
                                          0.114 * d[static_cast<size_t>(i * 3 + 2)];
        }
    } else if (c == 1) {
        out.assign(d.begin(), d.end());
    } else {
        throw ContractError("ssim: frames must have 1 or 3 channels, got " + std::to_string(c));
    }
    return out;
}

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Valid-region separable Gaussian filter: horizontal then vertical, output
// extents shrink by the window size minus one.
std::vector<double> filter_valid(const std::vector<double>& img, int64_t h, int64_t w,
                                 const double (&k)[kWin]) {
    const int64_t ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h * ow));
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * img[static_cast<size_t>(y * w + x + i)];
            tmp[static_cast<size_t>(y * ow + x)] = acc;
        }
    }
    std::vector<double> out(static_cast<size_t>(oh * ow));
    for (int64_t y = 0; y < oh; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * tmp[static_cast<size_t>((y + i) * ow + x)];
            out[static_cast<size_t>(y * ow + x)] = acc;
        }
    }
    return out;
}

}  // namespace

double psnr(const VideoSequence& a, const VideoSequence& b) {
    check_pair(a, b, "psnr");
    double se = 0.0;
    int64_t n = 0;
    for (size_t r = 0; r < a.frames.size(); ++r) {
        const auto x = a.frames[r].data();
        const auto y = b.frames[r].data();
        for (size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - y[i];
            se += d * d;
        }
        n += a.frames[r].size();
    }
    const double mse = se / static_cast<double>(n);
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const VideoSequence& a, const VideoSequence& b) {
    check_pair(a, b, "ssim");
    const int64_t h = a.height(), w = a.width();
    if (h < kWin || w < kWin) {
        throw ContractError("ssim: frames must be at least 11x11, got " +
                            shape_str(a.frames[0].shape()));
    }

    double k[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        ksum += k[i];
    }
    for (double& v : k) v /= ksum;

    double total = 0.0;
    for (size_t r = 0; r < a.frames.size(); ++r) {
        const std::vector<double> x = luma_plane(a.frames[r]);
        const std::vector<double> y = luma_plane(b.frames[r]);
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, h, w, k);
        const auto my = filter_valid(y, h, w, k);
        const auto exx = filter_valid(xx, h, w, k);
        const auto eyy = filter_valid(yy, h, w, k);
        const auto exy = filter_valid(xy, h, w, k);

        double acc = 0.0;
        for (size_t i = 0; i < mx.size(); ++i) {
            const double vx = exx[i] - mx[i] * mx[i];
            const double vy = eyy[i] - my[i] * my[i];
            const double cxy = exy[i] - mx[i] * my[i];
            acc += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cxy + kC2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / static_cast<double>(a.frames.size());
}

double flicker(const VideoSequence& pred, const VideoSequence& truth) {
    check_pair(pred, truth, "flicker");
    if (pred.length() < 2) {
        throw ContractError("flicker: needs at least 2 frames, got " +
                            std::to_string(pred.length()));
    }
    double total = 0.0;
    for (size_t r = 0; r + 1 < pred.frames.size(); ++r) {
        const auto p0 = pred.frames[r].data();
        const auto p1 = pred.frames[r + 1].data();
        const auto t0 = truth.frames[r].data();
        const auto t1 = truth.frames[r + 1].data();
        double acc = 0.0;
        for (size_t i = 0; i < p0.size(); ++i) {
            acc += std::abs((p1[i] - p0[i]) - (t1[i] - t0[i]));
        }
        total += acc / static_cast<double>(p0.size());
    }
    return total / static_cast<double>(pred.length() - 1);
}

}  // namespace dirlatent::metrics
