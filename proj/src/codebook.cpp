#include "dirlatent/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dirlatent/errors.hpp"
#include "dirlatent/ops.hpp"

namespace dirlatent {

Codebook::Codebook(Tensor items) : items_(std::move(items)) {
    if (items_.rank() != 2) {
        throw ContractError("codebook: items must be [count, dim], got " +
                            shape_str(items_.shape()));
    }
    if (items_.dim(0) < 1 || items_.dim(1) < 1) {
        throw ContractError("codebook: items must be non-empty");
    }
    for (double v : items_.data()) {
        if (!std::isfinite(v)) throw ContractError("codebook: items contain non-finite entries");
    }
}

namespace codebook {
namespace {

// Validates a weight tensor and returns its last-axis width.
int64_t weight_width(const Tensor& weights, const char* op) {
    if (weights.rank() < 1 || weights.shape().back() < 1) {
        throw ContractError(std::string(op) + ": weights need a non-empty last axis");
    }
    return weights.shape().back();
}

}  // namespace

Codebook init_uniform(int64_t count, int64_t dim, Rng& rng) {
    if (count < 1 || dim < 1) {
        throw ContractError("codebook: count and dim must be positive");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<double> v(static_cast<size_t>(count * dim));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Codebook(Tensor({count, dim}, std::move(v)));
}

Tensor decode_convex(const Tensor& weights, const Codebook& cb) {
    const int64_t n = weight_width(weights, "decode_convex");
    if (n != cb.count()) {
        throw ContractError("decode_convex: weight width " + std::to_string(n) +
                            " does not match code count " + std::to_string(cb.count()));
    }
    if (weights.rank() == 2) return ops::matmul(weights, cb.items());
    const int64_t rows = weights.size() / n;
    Shape out_shape(weights.shape().begin(), weights.shape().end() - 1);
    out_shape.push_back(cb.dim());
    const Tensor flat = ops::matmul(ops::reshape(weights, {rows, n}), cb.items());
    return ops::reshape(flat, out_shape);
}

Tensor quantize_nearest(const Tensor& weights) {
    const int64_t n = weight_width(weights, "quantize_nearest");
    const auto w = weights.data();
    std::vector<double> out(w.size(), 0.0);
    for (size_t base = 0; base < w.size(); base += static_cast<size_t>(n)) {
        int64_t best = 0;
        for (int64_t k = 1; k < n; ++k) {
            if (w[base + static_cast<size_t>(k)] > w[base + static_cast<size_t>(best)]) best = k;
        }
        out[base + static_cast<size_t>(best)] = 1.0;
    }
    return Tensor(weights.shape(), std::move(out));
}

Tensor aggregate_topk(const Tensor& weights, int64_t k) {
    const int64_t n = weight_width(weights, "aggregate_topk");
    if (k < 1 || k > n) {
        throw ContractError("aggregate_topk: k must be in [1, " + std::to_string(n) + "], got " +
                            std::to_string(k));
    }
    const auto w = weights.data();
    std::vector<double> out(w.size(), 0.0);
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (size_t base = 0; base < w.size(); base += static_cast<size_t>(n)) {
        std::iota(order.begin(), order.end(), int64_t{0});
        // Order by descending weight; equal weights keep the lower index.
        std::partial_sort(order.begin(), order.begin() + static_cast<size_t>(k), order.end(),
                          [&](int64_t a, int64_t b) {
                              const double wa = w[base + static_cast<size_t>(a)];
                              const double wb = w[base + static_cast<size_t>(b)];
                              return wa != wb ? wa > wb : a < b;
                          });
        double kept = 0.0;
        for (int64_t i = 0; i < k; ++i) kept += w[base + static_cast<size_t>(order[static_cast<size_t>(i)])];
        if (!(kept > 0.0)) {
            throw NumericError("aggregate_topk: selected weights do not sum to a positive value");
        }
        for (int64_t i = 0; i < k; ++i) {
            const size_t at = base + static_cast<size_t>(order[static_cast<size_t>(i)]);
            out[at] = w[at] / kept;
        }
    }
    return Tensor(weights.shape(), std::move(out));
}

}  // namespace codebook
}  // namespace dirlatent
