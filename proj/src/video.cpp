#include "dirlatent/video.hpp"

#include <cmath>

#include "dirlatent/errors.hpp"

namespace dirlatent {

void VideoSequence::validate() const {
    if (frames.empty()) throw ContractError("video: sequence has no frames");
    const Shape want = frames.front().shape();
    if (want.size() != 3) {
        throw ContractError("video: frames must be [h, w, c], got rank " +
                            std::to_string(want.size()));
    }
    for (size_t r = 0; r < frames.size(); ++r) {
        const Tensor& f = frames[r];
        if (f.shape() != want) {
            throw ContractError("video: frame " + std::to_string(r) + " has extents " +
                                shape_str(f.shape()) + ", expected " + shape_str(want));
        }
        for (int64_t i = 0; i < f.size(); ++i) {
            const double v = f.at(i);
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                throw ContractError("video: frame " + std::to_string(r) +
                                    " has a value outside [0, 1]");
            }
        }
    }
}

Tensor to_batch(const VideoSequence& v) {
    v.validate();
    const int64_t r_n = v.length(), h_n = v.height(), w_n = v.width(), c_n = v.channels();
    std::vector<double> out(static_cast<size_t>(r_n * c_n * h_n * w_n));
    for (int64_t r = 0; r < r_n; ++r) {
        const auto src = v.frames[static_cast<size_t>(r)].data();
        for (int64_t h = 0; h < h_n; ++h) {
            for (int64_t w = 0; w < w_n; ++w) {
                for (int64_t c = 0; c < c_n; ++c) {
                    out[static_cast<size_t>(((r * c_n + c) * h_n + h) * w_n + w)] =
                        src[static_cast<size_t>((h * w_n + w) * c_n + c)];
                }
            }
        }
    }
    return Tensor({r_n, c_n, h_n, w_n}, std::move(out));
}

VideoSequence from_batch(const Tensor& batch, double fps) {
    if (batch.rank() != 4) {
        throw ContractError("video: batch must be [r, c, h, w], got " + shape_str(batch.shape()));
    }
    const int64_t r_n = batch.dim(0), c_n = batch.dim(1), h_n = batch.dim(2), w_n = batch.dim(3);
    VideoSequence v;
    v.fps = fps;
    v.frames.reserve(static_cast<size_t>(r_n));
    const auto src = batch.data();
    for (int64_t r = 0; r < r_n; ++r) {
        std::vector<double> frame(static_cast<size_t>(h_n * w_n * c_n));
        for (int64_t h = 0; h < h_n; ++h) {
            for (int64_t w = 0; w < w_n; ++w) {
                for (int64_t c = 0; c < c_n; ++c) {
                    frame[static_cast<size_t>((h * w_n + w) * c_n + c)] =
                        src[static_cast<size_t>(((r * c_n + c) * h_n + h) * w_n + w)];
                }
            }
        }
        v.frames.emplace_back(Shape{h_n, w_n, c_n}, std::move(frame));
    }
    return v;
}

}  // namespace dirlatent
