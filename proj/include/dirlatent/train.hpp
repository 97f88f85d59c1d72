#pragma once

// Optimization loop: staged unfreezing over named parameter groups, an
// Adam-style optimizer with per-parameter update counts, and the toy
// clip datasets the loop trains against.

#include <cstdint>
#include <string>
#include <vector>

#include "dirlatent/data.hpp"
#include "dirlatent/network.hpp"
#include "dirlatent/objective.hpp"
#include "dirlatent/video.hpp"

namespace dirlatent {

// Half-open step range during which the listed parameter groups train.
struct StageSpec {
    int64_t from = 0;
    int64_t to = 0;
    std::vector<std::string> groups;
};

struct TrainConfig {
    int64_t steps = 500;
    int64_t clips = 10;        // clips in the toy dataset
    int64_t batch_clips = 1;   // clips drawn per step
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    std::string task = "bfr";  // "bfr" or "inpaint"
    NetConfig net;
    LossConfig loss;
    DegradeConfig degrade;
    ToyConfig toy;
    // Empty means the default three-phase ramp: backbone, then the
    // transformer, then the codebook.
    std::vector<StageSpec> schedule;

    void validate() const;
    std::vector<StageSpec> resolved_schedule() const;
};

struct TrainOutcome {
    Model model;
    std::vector<LossReport> reports;  // one per step
};

namespace train {

// Zeroes the three image planes under the mask and appends the mask as a
// fourth plane; mask is [h, w] over the clip.
VideoSequence inpaint_input(const VideoSequence& clean, const Tensor& mask);

struct Sample {
    VideoSequence input;   // degraded or masked clip
    VideoSequence target;  // clean clip
};

// Deterministic in tc.seed; the same config always yields the same clips.
std::vector<Sample> build_toy_dataset(const TrainConfig& tc);

// Runs the optimization; a warm start replaces the fresh initialization (its
// configuration must match tc.net). Throws NumericError annotated with the
// step index if a step produces a non-finite loss.
TrainOutcome run(const TrainConfig& tc, const Model* warm_start = nullptr);

}  // namespace train
}  // namespace dirlatent
