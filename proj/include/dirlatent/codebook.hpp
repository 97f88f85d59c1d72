#pragma once

// Learnable code vectors and the strategies for turning per-location weight
// vectors over those codes into latent vectors: soft convex combination,
// hard one-hot selection, and top-k truncation.

#include <cstdint>

#include "dirlatent/rng.hpp"
#include "dirlatent/tensor.hpp"

namespace dirlatent {

// A set of learnable code vectors stored as the rows of a [count, dim]
// tensor. The item tensor may live on a tape while the codes are trained.
class Codebook {
  public:
    // Adopts `items` as the code rows. Requires a rank-2 tensor with finite
    // entries.
    explicit Codebook(Tensor items);

    int64_t count() const { return items_.dim(0); }
    int64_t dim() const { return items_.dim(1); }
    const Tensor& items() const { return items_; }

  private:
    Tensor items_;
};

namespace codebook {

// Fills a [count, dim] codebook with independent uniform draws on
// [-1/sqrt(dim), 1/sqrt(dim)] so that convex combinations of rows start on
// the same scale as unit-variance features.
Codebook init_uniform(int64_t count, int64_t dim, Rng& rng);

// Soft decode: each location's latent vector is the weighted combination of
// all code rows, weights [..., count] -> latents [..., dim]. Differentiable
// with respect to both the weights and the code items.
Tensor decode_convex(const Tensor& weights, const Codebook& cb);

// Collapses each location's weight vector to a one-hot vector at its largest
// entry; ties resolve to the lowest index. The result selects a single code
// row under decode_convex.
Tensor quantize_nearest(const Tensor& weights);

// Keeps the k largest entries of each location's weight vector, zeroes the
// rest, and renormalizes the survivors to sum to one. Ties at the cutoff
// keep the lowest index. k = 1 reduces to quantize_nearest; k = count leaves
// a normalized field unchanged.
Tensor aggregate_topk(const Tensor& weights, int64_t k);

}  // namespace codebook
}  // namespace dirlatent
