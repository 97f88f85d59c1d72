#include "dirlatent/infer.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "dirlatent/codebook.hpp"
#include "dirlatent/dirichlet.hpp"
#include "dirlatent/errors.hpp"
#include "dirlatent/ops.hpp"

namespace dirlatent::infer {

namespace {

Tensor build_weights(const Tensor& alpha, const InferOptions& opt, Rng& rng) {
    if (opt.mode == "mean") return ops::simplex_normalize(alpha);
    if (opt.mode == "argmax") return codebook::quantize_nearest(ops::simplex_normalize(alpha));
    if (opt.mode == "topk") return codebook::aggregate_topk(ops::simplex_normalize(alpha), opt.topk);
    // "sample": one posterior draw per location.
    const int64_t n = alpha.dim(static_cast<int64_t>(alpha.rank()) - 1);
    const int64_t rows = alpha.size() / n;
    const auto ad = alpha.data();
    std::vector<double> w(static_cast<size_t>(alpha.size()));
    for (int64_t r = 0; r < rows; ++r) {
        const std::vector<double> draw =
            dirichlet::sample(ad.subspan(static_cast<size_t>(r * n), static_cast<size_t>(n)), rng);
        std::copy(draw.begin(), draw.end(), w.begin() + static_cast<int64_t>(r * n));
    }
    return Tensor(alpha.shape(), std::move(w));
}

}  // namespace

VideoSequence infer_video(const Model& model, const VideoSequence& input,
                          const InferOptions& opt) {
    input.validate();
    const NetConfig& nc = model.config();
    if (input.height() != nc.height || input.width() != nc.width) {
        throw ContractError("infer_video: clip extents do not match the model");
    }
    if (input.channels() != nc.in_channels) {
        throw ContractError("infer_video: expected " + std::to_string(nc.in_channels) +
                            " input channels, got " + std::to_string(input.channels()));
    }
    if (opt.mode != "mean" && opt.mode != "sample" && opt.mode != "topk" && opt.mode != "argmax") {
        throw ContractError("infer_video: unknown mode '" + opt.mode + "'");
    }
    if (opt.mode == "topk" && (opt.topk < 1 || opt.topk > nc.codebook_size)) {
        throw ContractError("infer_video: topk must lie in [1, codebook_size]");
    }

    const Binding b = model.bind();
    const Codebook cb(b.at("codebook.items"));
    Rng sample_rng(opt.seed);
    const int64_t frames = input.length();
    const int64_t window = nc.window;
    const int64_t center = window / 2;

    VideoSequence out;
    out.fps = input.fps;
    out.frames.reserve(static_cast<size_t>(frames));
    for (int64_t t = 0; t < frames; ++t) {
        VideoSequence slab;
        slab.fps = input.fps;
        slab.frames.reserve(static_cast<size_t>(window));
        for (int64_t i = 0; i < window; ++i) {
            const int64_t src = std::clamp(t + i - center, int64_t{0}, frames - 1);
            slab.frames.push_back(input.frames[static_cast<size_t>(src)]);
        }
        Tensor z = net::encode(b, nc, to_batch(slab));
        z = net::spatio_temporal_transform(b, nc, z);
        const Tensor alpha = net::predict_dirichlet_params(b, nc, z);
        const Tensor w = build_weights(alpha, opt, sample_rng);
        const Tensor y = net::decode(b, nc, codebook::decode_convex(w, cb));
        out.frames.push_back(from_batch(y, input.fps).frames[static_cast<size_t>(center)]);
    }
    return out;
}

}  // namespace dirlatent::infer
