#pragma once

// Restoration model: convolutional encoder, alternating spatial/temporal
// attention blocks, concentration-parameter head, and mirrored convolutional
// decoder. The model owns master parameter values; a Binding materializes
// them as tensors for one forward pass, optionally as differentiable leaves
// on a tape.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dirlatent/rng.hpp"
#include "dirlatent/tensor.hpp"

namespace dirlatent {

// Architecture hyperparameters. Defaults are the desk-scale configuration;
// reference-scale settings stay constructible for shape checks.
struct NetConfig {
    int64_t height = 64;
    int64_t width = 64;
    int64_t in_channels = 3;   // image planes plus any conditioning planes
    int64_t out_channels = 3;  // restored image planes
    int64_t downsample_stages = 3;
    int64_t residual_blocks = 4;   // total, distributed over stages
    int64_t transformer_pairs = 4;  // each pair = one spatial + one temporal block
    int64_t heads = 4;
    int64_t latent_dim = 32;    // per-location latent width d
    int64_t codebook_size = 64;  // number of code rows N
    int64_t window = 5;          // frames per processing window R
    int64_t base_channels = 32;  // channels after the first downsampling stage

    // Throws ContractError on inconsistent settings.
    void validate() const;

    int64_t latent_height() const { return height >> downsample_stages; }
    int64_t latent_width() const { return width >> downsample_stages; }
    // Channel width at downsampling stage s (0-based).
    int64_t stage_channels(int64_t s) const { return base_channels << s; }
    int64_t top_channels() const { return stage_channels(downsample_stages - 1); }
    // Residual blocks per stage; the remainder goes to the deepest stages.
    std::vector<int64_t> blocks_per_stage() const;
};

// One named parameter tensor with its master values.
struct Param {
    std::string name;
    Shape shape;
    std::vector<double> value;
};

// Parameter tensors for one forward pass. Built by Model::bind; parameters
// of trainable groups are tape leaves, the rest plain constants.
class Binding {
  public:
    const Tensor& at(const std::string& name) const;

  private:
    friend class Model;
    std::unordered_map<std::string, Tensor> by_name_;
};

class Model {
  public:
    // Randomly initialized parameters: uniform fan-in scaling for weights,
    // zeros for biases, ones for normalization gains.
    Model(NetConfig cfg, Rng& rng);

    const NetConfig& config() const { return cfg_; }
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    Param& param(const std::string& name);
    const Param& param(const std::string& name) const;

    // Constant binding for inference.
    Binding bind() const;
    // Binding with the named groups ("encoder", "transformer", "head",
    // "decoder", "codebook") as differentiable leaves on `tape`.
    Binding bind(Tape& tape, const std::vector<std::string>& trainable_groups) const;

    // Group prefix of a parameter name ("encoder.stage0.down.w" -> "encoder").
    static std::string group_of(const std::string& param_name);

  private:
    void add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);
    void add_constant(const std::string& name, Shape shape, double v);

    NetConfig cfg_;
    std::vector<Param> params_;
    std::unordered_map<std::string, size_t> index_;
};

namespace net {

// Interleaved sin/cos position code with a geometric frequency ladder
// (base 10000): row i describes positions[i], dim must be even.
Tensor sinusoidal_embedding(const std::vector<int64_t>& positions, int64_t dim);

// Frames [r, in_channels, H, W] -> latents [r, m, n, d] through strided
// convolutions interleaved with residual blocks, then a 1x1 projection.
Tensor encode(const Binding& p, const NetConfig& cfg, const Tensor& frames);

// Alternating attention: even blocks attend over the m*n spatial tokens of
// each frame, odd blocks over the r temporal tokens at each spatial site.
// Every block is residual; position codes are added to queries and keys.
Tensor spatio_temporal_transform(const Binding& p, const NetConfig& cfg, const Tensor& z);

// Linear map d -> N, softplus, then +1e-6 so every concentration parameter
// is strictly positive. [r, m, n, d] -> [r, m, n, N].
Tensor predict_dirichlet_params(const Binding& p, const NetConfig& cfg, const Tensor& z);

// Latents [r, m, n, d] -> frames [r, out_channels, H, W] through the
// mirrored stack of residual blocks and transposed convolutions; the final
// sigmoid keeps outputs in (0, 1).
Tensor decode(const Binding& p, const NetConfig& cfg, const Tensor& latents);

}  // namespace net
}  // namespace dirlatent
