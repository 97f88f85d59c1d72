#pragma once

// Fidelity and temporal-stability measurements over frame sequences. All
// functions are pure; inputs must be validated sequences on [0, 1].

#include "dirlatent/video.hpp"

namespace dirlatent {

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double flicker = 0.0;
};

namespace metrics {

// 10*log10(1/MSE) over all frames and channels, capped at 100 dB when the
// error falls below 1e-10.
double psnr(const VideoSequence& a, const VideoSequence& b);

// Single-scale structural similarity on internally grayscale frames: 11x11
// Gaussian window sigma 1.5, stability constants (0.01)^2 and (0.03)^2.
// Frames smaller than the window are rejected.
double ssim(const VideoSequence& a, const VideoSequence& b);

// Mean |(pred_{t+1}-pred_t) - (truth_{t+1}-truth_t)|: temporal variation the
// ground truth does not explain. Requires length >= 2.
double flicker(const VideoSequence& pred, const VideoSequence& truth);

}  // namespace metrics
}  // namespace dirlatent
