#pragma once

// Frame-sequence value type shared by the data, training, inference, and
// metric layers. Frames are [H, W, C] tensors with values in [0, 1].

#include <cstdint>
#include <vector>

#include "dirlatent/tensor.hpp"

namespace dirlatent {

struct VideoSequence {
    std::vector<Tensor> frames;  // each [H, W, C], uniform extents
    double fps = 24.0;           // informational only

    int64_t length() const { return static_cast<int64_t>(frames.size()); }
    int64_t height() const { return frames.at(0).dim(0); }
    int64_t width() const { return frames.at(0).dim(1); }
    int64_t channels() const { return frames.at(0).dim(2); }

    // Non-empty, uniform rank-3 extents, all values in [0, 1].
    void validate() const;
};

// Stacks frames into the network layout [R, C, H, W].
Tensor to_batch(const VideoSequence& v);
// Splits a [R, C, H, W] batch back into [H, W, C] frames.
VideoSequence from_batch(const Tensor& batch, double fps = 24.0);

}  // namespace dirlatent
