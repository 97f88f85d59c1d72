#include "dirlatent/network.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dirlatent/errors.hpp"
#include "dirlatent/ops.hpp"

namespace dirlatent {

void NetConfig::validate() const {
    if (height < 1 || width < 1 || in_channels < 1 || out_channels < 1 ||
        downsample_stages < 1 || residual_blocks < 0 || transformer_pairs < 1 || heads < 1 ||
        latent_dim < 1 || codebook_size < 2 || window < 1 || base_channels < 1) {
        throw ContractError("net config: all sizes must be positive (codebook >= 2)");
    }
    const int64_t div = int64_t{1} << downsample_stages;
    if (height % div != 0 || width % div != 0) {
        throw ContractError("net config: height and width must be divisible by 2^stages");
    }
    if (latent_dim % heads != 0) {
        throw ContractError("net config: latent_dim must be divisible by heads");
    }
    if (latent_dim % 2 != 0) {
        throw ContractError("net config: latent_dim must be even for sin/cos position codes");
    }
}

std::vector<int64_t> NetConfig::blocks_per_stage() const {
    std::vector<int64_t> out(static_cast<size_t>(downsample_stages),
                             residual_blocks / downsample_stages);
    const int64_t rem = residual_blocks % downsample_stages;
    for (int64_t i = 0; i < rem; ++i) {
        out[static_cast<size_t>(downsample_stages - 1 - i)] += 1;
    }
    return out;
}

const Tensor& Binding::at(const std::string& name) const {
    const auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ContractError("binding: unknown parameter " + name);
    return it->second;
}

namespace {
const std::unordered_set<std::string> kGroups = {"encoder", "transformer", "head", "decoder",
                                                 "codebook"};
}  // namespace

std::string Model::group_of(const std::string& param_name) {
    return param_name.substr(0, param_name.find('.'));
}

void Model::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (double& x : v) x = rng.uniform(-bound, bound);
    index_.emplace(name, params_.size());
    params_.push_back({name, std::move(shape), std::move(v)});
}

void Model::add_constant(const std::string& name, Shape shape, double value) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)), value);
    index_.emplace(name, params_.size());
    params_.push_back({name, std::move(shape), std::move(v)});
}

Model::Model(NetConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int64_t stages = cfg_.downsample_stages;
    const int64_t d = cfg_.latent_dim;
    const int64_t n = cfg_.codebook_size;
    const auto blocks = cfg_.blocks_per_stage();

    const auto conv_bound = [](int64_t c, int64_t k) {
        return 1.0 / std::sqrt(static_cast<double>(c * k * k));
    };
    const auto add_residual = [&](const std::string& prefix, int64_t ch) {
        add_uniform(prefix + ".conv1.w", {ch, ch, 3, 3}, conv_bound(ch, 3), rng);
        add_constant(prefix + ".conv1.b", {ch}, 0.0);
        add_uniform(prefix + ".conv2.w", {ch, ch, 3, 3}, conv_bound(ch, 3), rng);
        add_constant(prefix + ".conv2.b", {ch}, 0.0);
    };

    for (int64_t s = 0; s < stages; ++s) {
        const std::string st = "encoder.stage" + std::to_string(s);
        const int64_t cin = s == 0 ? cfg_.in_channels : cfg_.stage_channels(s - 1);
        const int64_t cout = cfg_.stage_channels(s);
        add_uniform(st + ".down.w", {cout, cin, 4, 4}, conv_bound(cin, 4), rng);
        add_constant(st + ".down.b", {cout}, 0.0);
        for (int64_t j = 0; j < blocks[static_cast<size_t>(s)]; ++j) {
            add_residual(st + ".res" + std::to_string(j), cout);
        }
    }
    add_uniform("encoder.proj.w", {d, cfg_.top_channels(), 1, 1},
                conv_bound(cfg_.top_channels(), 1), rng);
    add_constant("encoder.proj.b", {d}, 0.0);

    const double lin_bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (int64_t i = 0; i < 2 * cfg_.transformer_pairs; ++i) {
        const std::string bl = "transformer.block" + std::to_string(i);
        add_constant(bl + ".ln.gamma", {d}, 1.0);
        add_constant(bl + ".ln.beta", {d}, 0.0);
        for (const char* w : {".wq", ".wk", ".wv", ".wo"}) {
            add_uniform(bl + w, {d, d}, lin_bound, rng);
        }
    }

    add_uniform("head.w", {d, n}, lin_bound, rng);
    add_constant("head.b", {n}, 0.0);

    add_uniform("decoder.proj.w", {cfg_.top_channels(), d, 1, 1}, conv_bound(d, 1), rng);
    add_constant("decoder.proj.b", {cfg_.top_channels()}, 0.0);
    for (int64_t s = stages - 1; s >= 0; --s) {
        const std::string st = "decoder.stage" + std::to_string(s);
        const int64_t ch = cfg_.stage_channels(s);
        const int64_t up_out = s == 0 ? cfg_.base_channels : cfg_.stage_channels(s - 1);
        for (int64_t j = 0; j < blocks[static_cast<size_t>(s)]; ++j) {
            add_residual(st + ".res" + std::to_string(j), ch);
        }
        add_uniform(st + ".up.w", {ch, up_out, 4, 4}, conv_bound(ch, 4), rng);
        add_constant(st + ".up.b", {up_out}, 0.0);
    }
    add_uniform("decoder.out.w", {cfg_.out_channels, cfg_.base_channels, 3, 3},
                conv_bound(cfg_.base_channels, 3), rng);
    add_constant("decoder.out.b", {cfg_.out_channels}, 0.0);

    add_uniform("codebook.items", {n, d}, lin_bound, rng);
}

Param& Model::param(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("model: unknown parameter " + name);
    return params_[it->second];
}

const Param& Model::param(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("model: unknown parameter " + name);
    return params_[it->second];
}

Binding Model::bind() const {
    Binding b;
    for (const Param& p : params_) b.by_name_.emplace(p.name, Tensor(p.shape, p.value));
    return b;
}

Binding Model::bind(Tape& tape, const std::vector<std::string>& trainable_groups) const {
    std::unordered_set<std::string> train;
    for (const std::string& g : trainable_groups) {
        if (!kGroups.count(g)) throw ContractError("model: unknown parameter group " + g);
        train.insert(g);
    }
    Binding b;
    for (const Param& p : params_) {
        if (train.count(group_of(p.name))) {
            b.by_name_.emplace(p.name, tape.leaf(p.shape, p.value));
        } else {
            b.by_name_.emplace(p.name, Tensor(p.shape, p.value));
        }
    }
    return b;
}

namespace net {
namespace {

Tensor conv_layer(const Binding& p, const std::string& prefix, const Tensor& x, int stride,
                  int pad) {
    return ops::bias_nchw(ops::conv2d(x, p.at(prefix + ".w"), stride, pad),
                          p.at(prefix + ".b"));
}

// Pre-activation residual block: x + conv(lrelu(conv(lrelu(x)))).
Tensor residual_block(const Binding& p, const std::string& prefix, const Tensor& x) {
    Tensor h = ops::leaky_relu(x);
    h = conv_layer(p, prefix + ".conv1", h, 1, 1);
    h = ops::leaky_relu(h);
    h = conv_layer(p, prefix + ".conv2", h, 1, 1);
    return ops::add(x, h);
}

// Constant [batch, tokens, dim] tensor holding the position code of every
// token, replicated across the batch.
Tensor tiled_positions(int64_t batch, int64_t tokens, int64_t dim) {
    std::vector<int64_t> pos(static_cast<size_t>(tokens));
    std::iota(pos.begin(), pos.end(), int64_t{0});
    const Tensor row = sinusoidal_embedding(pos, dim);
    std::vector<double> v;
    v.reserve(static_cast<size_t>(batch * tokens * dim));
    for (int64_t b = 0; b < batch; ++b) v.insert(v.end(), row.data().begin(), row.data().end());
    return Tensor({batch, tokens, dim}, std::move(v));
}

// One residual multi-head self-attention block over x [batch, tokens, dim].
Tensor attention_block(const Binding& p, const std::string& prefix, const NetConfig& cfg,
                       const Tensor& x) {
    const int64_t batch = x.dim(0), tokens = x.dim(1), d = x.dim(2);
    const int64_t heads = cfg.heads, hd = d / heads;

    const Tensor ln = ops::layer_norm(x, p.at(prefix + ".ln.gamma"), p.at(prefix + ".ln.beta"));
    const Tensor pos = tiled_positions(batch, tokens, d);
    const Tensor q = ops::add(ops::matmul(ln, p.at(prefix + ".wq")), pos);
    const Tensor k = ops::add(ops::matmul(ln, p.at(prefix + ".wk")), pos);
    const Tensor v = ops::matmul(ln, p.at(prefix + ".wv"));

    const auto split_heads = [&](const Tensor& t) {
        return ops::reshape(
            ops::transpose(ops::reshape(t, {batch, tokens, heads, hd}), {0, 2, 1, 3}),
            {batch * heads, tokens, hd});
    };
    const Tensor scores =
        ops::mul_scalar(ops::matmul(split_heads(q), ops::transpose(split_heads(k), {0, 2, 1})),
                        1.0 / std::sqrt(static_cast<double>(hd)));
    const Tensor ctx = ops::matmul(ops::softmax(scores), split_heads(v));
    const Tensor merged = ops::reshape(
        ops::transpose(ops::reshape(ctx, {batch, heads, tokens, hd}), {0, 2, 1, 3}),
        {batch, tokens, d});
    return ops::add(x, ops::matmul(merged, p.at(prefix + ".wo")));
}

void require_latent_grid(const Tensor& z, const NetConfig& cfg, const char* op) {
    if (z.rank() != 4 || z.dim(1) != cfg.latent_height() || z.dim(2) != cfg.latent_width() ||
        z.dim(3) != cfg.latent_dim) {
        throw ContractError(std::string(op) + ": latents " + shape_str(z.shape()) +
                            " do not match the configured grid");
    }
}

}  // namespace

Tensor sinusoidal_embedding(const std::vector<int64_t>& positions, int64_t dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw ContractError("sinusoidal_embedding: dim must be even and positive");
    }
    const int64_t len = static_cast<int64_t>(positions.size());
    std::vector<double> v(static_cast<size_t>(len * dim));
    for (int64_t i = 0; i < len; ++i) {
        const double pos = static_cast<double>(positions[static_cast<size_t>(i)]);
        for (int64_t j = 0; j < dim / 2; ++j) {
            const double freq =
                std::exp(-std::log(10000.0) * (2.0 * static_cast<double>(j)) /
                         static_cast<double>(dim));
            v[static_cast<size_t>(i * dim + 2 * j)] = std::sin(pos * freq);
            v[static_cast<size_t>(i * dim + 2 * j + 1)] = std::cos(pos * freq);
        }
    }
    return Tensor({len, dim}, std::move(v));
}

Tensor encode(const Binding& p, const NetConfig& cfg, const Tensor& frames) {
    cfg.validate();
    if (frames.rank() != 4 || frames.dim(1) != cfg.in_channels || frames.dim(2) != cfg.height ||
        frames.dim(3) != cfg.width) {
        throw ContractError("encode: frames " + shape_str(frames.shape()) +
                            " do not match the configured extent");
    }
    const auto blocks = cfg.blocks_per_stage();
    Tensor x = frames;
    for (int64_t s = 0; s < cfg.downsample_stages; ++s) {
        const std::string st = "encoder.stage" + std::to_string(s);
        x = ops::leaky_relu(conv_layer(p, st + ".down", x, 2, 1));
        for (int64_t j = 0; j < blocks[static_cast<size_t>(s)]; ++j) {
            x = residual_block(p, st + ".res" + std::to_string(j), x);
        }
    }
    x = conv_layer(p, "encoder.proj", x, 1, 0);
    return ops::transpose(x, {0, 2, 3, 1});
}

Tensor spatio_temporal_transform(const Binding& p, const NetConfig& cfg, const Tensor& z) {
    cfg.validate();
    if (z.rank() != 4 || z.dim(3) != cfg.latent_dim) {
        throw ContractError("spatio_temporal_transform: latents " + shape_str(z.shape()) +
                            " must be [r, m, n, " + std::to_string(cfg.latent_dim) + "]");
    }
    const int64_t r = z.dim(0), m = z.dim(1), n = z.dim(2), d = cfg.latent_dim;
    Tensor x = ops::reshape(z, {r, m * n, d});
    for (int64_t i = 0; i < 2 * cfg.transformer_pairs; ++i) {
        const bool temporal = i % 2 == 1;
        // Temporal blocks attend across frames at a fixed spatial site.
        if (temporal) x = ops::transpose(x, {1, 0, 2});
        x = attention_block(p, "transformer.block" + std::to_string(i), cfg, x);
        if (temporal) x = ops::transpose(x, {1, 0, 2});
    }
    return ops::reshape(x, {r, m, n, d});
}

Tensor predict_dirichlet_params(const Binding& p, const NetConfig& cfg, const Tensor& z) {
    cfg.validate();
    if (z.rank() != 4 || z.dim(3) != cfg.latent_dim) {
        throw ContractError("predict_dirichlet_params: latents " + shape_str(z.shape()) +
                            " must end in dim " + std::to_string(cfg.latent_dim));
    }
    const int64_t rows = z.dim(0) * z.dim(1) * z.dim(2);
    Tensor a = ops::bias_rows(ops::matmul(ops::reshape(z, {rows, cfg.latent_dim}), p.at("head.w")),
                              p.at("head.b"));
    a = ops::add_scalar(ops::softplus(a), 1e-6);
    return ops::reshape(a, {z.dim(0), z.dim(1), z.dim(2), cfg.codebook_size});
}

Tensor decode(const Binding& p, const NetConfig& cfg, const Tensor& latents) {
    cfg.validate();
    require_latent_grid(latents, cfg, "decode");
    const auto blocks = cfg.blocks_per_stage();
    Tensor x = ops::transpose(latents, {0, 3, 1, 2});
    x = conv_layer(p, "decoder.proj", x, 1, 0);
    for (int64_t s = cfg.downsample_stages - 1; s >= 0; --s) {
        const std::string st = "decoder.stage" + std::to_string(s);
        for (int64_t j = 0; j < blocks[static_cast<size_t>(s)]; ++j) {
            x = residual_block(p, st + ".res" + std::to_string(j), x);
        }
        x = ops::leaky_relu(ops::bias_nchw(ops::conv2d_transpose(x, p.at(st + ".up.w"), 2, 1),
                                           p.at(st + ".up.b")));
    }
    x = conv_layer(p, "decoder.out", x, 1, 1);
    return ops::sigmoid(x);
}

}  // namespace net
}  // namespace dirlatent
