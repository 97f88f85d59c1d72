#pragma once

// Sliding-window restoration: every output frame is the center prediction of
// a window around it, with edge replication at the sequence boundaries.

#include <cstdint>
#include <string>

#include "dirlatent/network.hpp"
#include "dirlatent/video.hpp"

namespace dirlatent {

struct InferOptions {
    // Weight construction over the codebook: "mean" (expected weights),
    // "sample" (one posterior draw), "topk" (renormalized k largest), or
    // "argmax" (hard selection).
    std::string mode = "mean";
    int64_t topk = 4;
    uint64_t seed = 0;  // stream for "sample" mode
};

namespace infer {

// Restores input frame-for-frame; deterministic in every mode except
// "sample", which is deterministic in opt.seed.
VideoSequence infer_video(const Model& model, const VideoSequence& input,
                          const InferOptions& opt = {});

}  // namespace infer
}  // namespace dirlatent
