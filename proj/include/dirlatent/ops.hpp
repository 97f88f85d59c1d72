#pragma once

#include <cstdint>
#include <vector>

#include "dirlatent/tensor.hpp"

// Differentiable op set. Every op evaluates eagerly; when an input carries a
// tape handle the result is recorded on that tape with a backward closure.
// Mixing tensors from two different tapes is a contract error. There is no
// implicit broadcasting: elementwise ops require identical shapes, and the
// bias/normalization patterns the networks need are explicit ops.
namespace dirlatent::ops {

// ---- shape ----

// Same storage, new shape (numel must match).
Tensor reshape(const Tensor& x, Shape shape);
// General N-d axis permutation: out axis i is input axis perm[i].
Tensor transpose(const Tensor& x, const std::vector<int>& perm);

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor exp(const Tensor& x);
// Natural log; domain x > 0.
Tensor log(const Tensor& x);
// Absolute value; subgradient 0 at the kink.
Tensor abs(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
// log(1 + e^x), overflow-safe on both tails.
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---- linear algebra ----

// [m,k]x[k,n] -> [m,n]; [b,m,k]x[k,n] -> [b,m,n]; [b,m,k]x[b,k,n] -> [b,m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// x: [rows, n], bias: [n]; adds bias to every row.
Tensor bias_rows(const Tensor& x, const Tensor& bias);
// x: [b, c, h, w], bias: [c]; adds bias to every channel plane.
Tensor bias_nchw(const Tensor& x, const Tensor& bias);

// ---- convolution ----

// x: [b, c, h, w], w: [o, c, kh, kw] -> [b, o, ho, wo] with
// ho = (h + 2*pad - kh) / stride + 1 (must divide exactly).
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
// Adjoint map of conv2d. x: [b, c, h, w], w: [c, o, kh, kw] ->
// [b, o, (h-1)*stride - 2*pad + kh, (w-1)*stride - 2*pad + kw].
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, int stride, int pad);

// ---- normalization / reductions ----

// Softmax over the last axis with max subtraction. Rejects non-finite input.
Tensor softmax(const Tensor& x);
// Normalization over the last axis of strictly positive entries: x / sum(x).
Tensor simplex_normalize(const Tensor& x);
// Normalize the last axis to zero mean / unit variance, then scale and shift:
// gamma, beta have shape [last_dim].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Scalar reductions over all elements.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Index of the largest entry along the last axis; ties resolve to the lowest
// index. Not differentiable.
std::vector<int64_t> argmax_last(const Tensor& x);

// ---- raw kernels (shared by conv/matmul backward and tests) ----
namespace detail {
// C += A(m,k) * B(k,n), all row-major contiguous.
void mm_acc(double* c, const double* a, const double* b, int64_t m, int64_t k, int64_t n);
// out(n,m) = in(m,n).
void transpose2d(double* out, const double* in, int64_t m, int64_t n);
// cols[(c*kh+u)*kw+v][i*wo+j] = x[c][i*stride-pad+u][j*stride-pad+v] (0 outside).
void im2col(double* cols, const double* x, int64_t c, int64_t h, int64_t w,
            int64_t kh, int64_t kw, int stride, int pad, int64_t ho, int64_t wo);
// Adjoint scatter-add of im2col.
void col2im(double* x, const double* cols, int64_t c, int64_t h, int64_t w,
            int64_t kh, int64_t kw, int stride, int pad, int64_t ho, int64_t wo);
}  // namespace detail

}  // namespace dirlatent::ops
