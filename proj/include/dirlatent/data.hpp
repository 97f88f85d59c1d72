#pragma once

// Synthetic clip generation and the degradation pipeline used to build
// training pairs: moving structured patterns stand in for real footage, and
// blur/downsample/noise/quantize models the acquisition loss to restore.

#include <cstdint>
#include <vector>

#include "dirlatent/rng.hpp"
#include "dirlatent/video.hpp"

namespace dirlatent {

struct ToyConfig {
    int64_t frames = 5;
    int64_t height = 64;
    int64_t width = 64;
    double fps = 24.0;

    void validate() const;  // positive extents
};

// Degradation strengths are drawn once per clip so a clip is temporally
// consistent; the draw ranges are the knobs.
struct DegradeConfig {
    double blur_sigma_min = 1.0;
    double blur_sigma_max = 3.0;
    std::vector<int64_t> down_factors = {2, 4};
    double noise_sigma_min = 0.0;
    double noise_sigma_max = 0.05;
    std::vector<int64_t> quant_levels = {32, 64, 256};
    uint64_t seed = 0;  // used by callers that derive their own streams

    void validate() const;
};

namespace data {

// Smoothly moving "face" (ellipse, two disc eyes, arc mouth) over a textured
// background. Deterministic in the rng; values stay inside [0, 1].
VideoSequence generate_toy_sequence(const ToyConfig& cfg, Rng& rng);

// Blur -> bilinear downsample -> additive noise -> uniform quantization ->
// bilinear upsample back to the source extents. Strengths fixed per clip.
VideoSequence degrade_bfr(const VideoSequence& clean, const DegradeConfig& dc, Rng& rng);

// Luma 0.299 R + 0.587 G + 0.114 B replicated to all three channels.
VideoSequence to_grayscale(const VideoSequence& v);

// Random polyline brush stroke rasterized to a {0,1} mask of shape [h, w];
// resamples until coverage lands in [5%, 40%].
Tensor make_mask_brush(int64_t height, int64_t width, Rng& rng);

}  // namespace data
}  // namespace dirlatent
