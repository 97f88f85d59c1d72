#pragma once

// Flat dotted-key run configuration shared by every command verb. A config is
// parsed from JSON and/or "key=value" overrides, finalized (auto fields
// resolved), validated, and echoed back as a resolved snapshot.

#include <cstdint>
#include <string>

#include "dirlatent/infer.hpp"
#include "dirlatent/train.hpp"

namespace dirlatent {

struct RunConfig {
    TrainConfig train;        // task, network, loss, degradation, clip source
    InferOptions infer;
    std::string checkpoint;   // model file consumed by infer/eval
    std::string infer_input;  // optional directory of numbered ppm frames
    int64_t eval_clips = 10;
    int64_t eval_frames = 5;
    uint64_t eval_seed = 1000;
    int64_t ablate_steps = 120;  // training steps per ablation variant

    // Defaults leave net extents and input planes on "auto" (0) so they can
    // follow the data extents and the task until finalize().
    static RunConfig defaults();

    // Strict parse of a flat JSON object; unknown keys or wrong value types
    // throw ConfigError.
    static RunConfig from_json_text(const std::string& text);

    // "dotted.key=value"; the value side accepts JSON literals or bare words.
    void apply_override(const std::string& assignment);

    // One seed drives the training, evaluation, and sampling streams.
    void set_master_seed(uint64_t seed);

    // Resolves auto fields (net extents from data, input planes from task).
    // Idempotent.
    void finalize();

    void validate() const;

    // Complete sorted-key snapshot of every configurable field.
    std::string resolved_json() const;
};

}  // namespace dirlatent
