#include "dirlatent/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dirlatent::ops {

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->on_tape()) continue;
        if (tape && tape != t->tape()) {
            throw ContractError("ops: operands live on different tapes");
        }
        tape = t->tape();
    }
    return tape;
}

int node_of(const Tensor& t) { return t.on_tape() ? t.node() : -1; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Map a tensor to (slices, n) where n is the size of the last axis.
std::pair<int64_t, int64_t> last_axis_view(const Tensor& x, const char* op) {
    if (x.rank() < 1) throw ContractError(std::string(op) + ": rank-0 tensor has no last axis");
    const int64_t n = x.dim(x.rank() - 1);
    if (n < 1) throw ContractError(std::string(op) + ": empty last axis");
    return {x.size() / n, n};
}

}  // namespace

// ---- shape ----

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size()) {
        throw ContractError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                            shape_str(shape));
    }
    Tensor out = Tensor::view(x.storage(), std::move(shape));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        },
        "reshape");
}

Tensor transpose(const Tensor& x, const std::vector<int>& perm) {
    const int r = x.rank();
    if (static_cast<int>(perm.size()) != r) {
        throw ContractError("transpose: perm rank mismatch");
    }
    std::vector<bool> seen(static_cast<size_t>(r), false);
    for (int p : perm) {
        if (p < 0 || p >= r || seen[static_cast<size_t>(p)]) {
            throw ContractError("transpose: perm is not a permutation");
        }
        seen[static_cast<size_t>(p)] = true;
    }
    Shape oshape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) oshape[static_cast<size_t>(i)] = x.dim(perm[static_cast<size_t>(i)]);

    // Walk the output in order; in_flat tracks the corresponding input offset.
    std::vector<int64_t> istr(static_cast<size_t>(std::max(r, 1)), 1);
    for (int i = r - 2; i >= 0; --i) {
        istr[static_cast<size_t>(i)] = istr[static_cast<size_t>(i + 1)] * x.dim(i + 1);
    }
    std::vector<int64_t> step(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) step[static_cast<size_t>(i)] = istr[static_cast<size_t>(perm[static_cast<size_t>(i)])];

    const auto xd = x.data();
    std::vector<double> y(static_cast<size_t>(x.size()));
    {
        std::vector<int64_t> idx(static_cast<size_t>(r), 0);
        int64_t in_flat = 0;
        for (int64_t o = 0; o < x.size(); ++o) {
            y[static_cast<size_t>(o)] = xd[static_cast<size_t>(in_flat)];
            for (int ax = r - 1; ax >= 0; --ax) {
                idx[static_cast<size_t>(ax)]++;
                in_flat += step[static_cast<size_t>(ax)];
                if (idx[static_cast<size_t>(ax)] < oshape[static_cast<size_t>(ax)]) break;
                in_flat -= step[static_cast<size_t>(ax)] * oshape[static_cast<size_t>(ax)];
                idx[static_cast<size_t>(ax)] = 0;
            }
        }
    }
    Tensor out(oshape, std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, oshape, step, r](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            std::vector<int64_t> idx(static_cast<size_t>(r), 0);
            int64_t in_flat = 0;
            for (size_t o = 0; o < g.size(); ++o) {
                gx[static_cast<size_t>(in_flat)] += g[o];
                for (int ax = r - 1; ax >= 0; --ax) {
                    idx[static_cast<size_t>(ax)]++;
                    in_flat += step[static_cast<size_t>(ax)];
                    if (idx[static_cast<size_t>(ax)] < oshape[static_cast<size_t>(ax)]) break;
                    in_flat -= step[static_cast<size_t>(ax)] * oshape[static_cast<size_t>(ax)];
                    idx[static_cast<size_t>(ax)] = 0;
                }
            }
        },
        "transpose");
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tape* tape = common_tape({&a, &b});
    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<double> y(ad.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = ad[i] + bd[i];
    Tensor out(a.shape(), std::move(y));
    if (!tape) return out;
    const int an = node_of(a), bn = node_of(b);
    return tape->emit(
        std::move(out), {an, bn},
        [an, bn](Tape& t, int self) {
            auto g = t.grad(self);
            if (an >= 0) {
                auto ga = t.grad_mut(an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn >= 0) {
                auto gb = t.grad_mut(bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        },
        "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tape* tape = common_tape({&a, &b});
    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<double> y(ad.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = ad[i] - bd[i];
    Tensor out(a.shape(), std::move(y));
    if (!tape) return out;
    const int an = node_of(a), bn = node_of(b);
    return tape->emit(
        std::move(out), {an, bn},
        [an, bn](Tape& t, int self) {
            auto g = t.grad(self);
            if (an >= 0) {
                auto ga = t.grad_mut(an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn >= 0) {
                auto gb = t.grad_mut(bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        },
        "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tape* tape = common_tape({&a, &b});
    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<double> y(ad.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = ad[i] * bd[i];
    Tensor out(a.shape(), std::move(y));
    if (!tape) return out;
    const int an = node_of(a), bn = node_of(b);
    return tape->emit(
        std::move(out), {an, bn},
        [an, bn, a, b](Tape& t, int self) {
            auto g = t.grad(self);
            if (an >= 0) {
                auto ga = t.grad_mut(an);
                const auto bd2 = b.data();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd2[i];
            }
            if (bn >= 0) {
                auto gb = t.grad_mut(bn);
                const auto ad2 = a.data();
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad2[i];
            }
        },
        "mul");
}

Tensor add_scalar(const Tensor& x, double c) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = xd[i] + c;
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        },
        "add_scalar");
}

Tensor mul_scalar(const Tensor& x, double c) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = xd[i] * c;
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, c](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
        },
        "mul_scalar");
}

Tensor exp(const Tensor& x) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = std::exp(xd[i]);
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    Tensor kept = out;  // exp'(x) = exp(x): reuse the forward value
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, kept](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto yd = kept.data();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yd[i];
        },
        "exp");
}

Tensor log(const Tensor& x) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) {
        if (!(xd[i] > 0.0)) throw DomainError("log: input must be positive");
        y[i] = std::log(xd[i]);
    }
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, x](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto xd2 = x.data();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xd2[i];
        },
        "log");
}

Tensor abs(const Tensor& x) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = std::fabs(xd[i]);
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, x](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto xd2 = x.data();
            for (size_t i = 0; i < g.size(); ++i) {
                const double s = xd2[i] > 0.0 ? 1.0 : (xd2[i] < 0.0 ? -1.0 : 0.0);
                gx[i] += g[i] * s;
            }
        },
        "abs");
}

Tensor leaky_relu(const Tensor& x, double slope) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = xd[i] >= 0.0 ? xd[i] : slope * xd[i];
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, x, slope](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto xd2 = x.data();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xd2[i] >= 0.0 ? 1.0 : slope);
        },
        "leaky_relu");
}

Tensor softplus(const Tensor& x) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = std::max(xd[i], 0.0) + std::log1p(std::exp(-std::fabs(xd[i])));
    }
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, x](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto xd2 = x.data();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * stable_sigmoid(xd2[i]);
        },
        "softplus");
}

Tensor sigmoid(const Tensor& x) {
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = stable_sigmoid(xd[i]);
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    Tensor kept = out;
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, kept](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto yd = kept.data();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yd[i] * (1.0 - yd[i]);
        },
        "sigmoid");
}

// ---- raw kernels ----

namespace detail {

namespace {

#if defined(__GNUC__) || defined(__clang__)
#define DIRLATENT_HAVE_VEC 1
// 8-lane double vector; the compiler lowers it to whatever SIMD the target
// has (one zmm op under AVX-512, two ymm ops under AVX2, ...). The point of
// spelling the 4x16 tile as named vector variables is to keep the
// accumulators in registers — indexed arrays tend to get spilled.
using v8d = double __attribute__((vector_size(64)));

inline v8d v8_load(const double* p) {
    v8d v;
    __builtin_memcpy(&v, p, sizeof(v));
    return v;
}

inline void v8_store(double* p, v8d v) { __builtin_memcpy(p, &v, sizeof(v)); }

inline v8d v8_splat(double x) { return v8d{x, x, x, x, x, x, x, x}; }

// c[0..3][j0..j0+15] += a[i0..i0+3][:] * b[:][j0..j0+15]
inline void tile_4x16(double* c, const double* a, const double* b, int64_t k, int64_t n,
                      int64_t i0, int64_t j0) {
    v8d c00 = v8_splat(0.0), c01 = c00, c10 = c00, c11 = c00;
    v8d c20 = c00, c21 = c00, c30 = c00, c31 = c00;
    const double* a0 = a + (i0 + 0) * k;
    const double* a1 = a + (i0 + 1) * k;
    const double* a2 = a + (i0 + 2) * k;
    const double* a3 = a + (i0 + 3) * k;
    for (int64_t p = 0; p < k; ++p) {
        const v8d b0 = v8_load(b + p * n + j0);
        const v8d b1 = v8_load(b + p * n + j0 + 8);
        v8d av = v8_splat(a0[p]);
        c00 += av * b0;
        c01 += av * b1;
        av = v8_splat(a1[p]);
        c10 += av * b0;
        c11 += av * b1;
        av = v8_splat(a2[p]);
        c20 += av * b0;
        c21 += av * b1;
        av = v8_splat(a3[p]);
        c30 += av * b0;
        c31 += av * b1;
    }
    double* r0 = c + (i0 + 0) * n + j0;
    double* r1 = c + (i0 + 1) * n + j0;
    double* r2 = c + (i0 + 2) * n + j0;
    double* r3 = c + (i0 + 3) * n + j0;
    v8_store(r0, v8_load(r0) + c00);
    v8_store(r0 + 8, v8_load(r0 + 8) + c01);
    v8_store(r1, v8_load(r1) + c10);
    v8_store(r1 + 8, v8_load(r1 + 8) + c11);
    v8_store(r2, v8_load(r2) + c20);
    v8_store(r2 + 8, v8_load(r2 + 8) + c21);
    v8_store(r3, v8_load(r3) + c30);
    v8_store(r3 + 8, v8_load(r3 + 8) + c31);
}
#endif

}  // namespace

void mm_acc(double* c, const double* a, const double* b, int64_t m, int64_t k, int64_t n) {
    int64_t j0 = 0;
    int64_t i_done = 0;
#if DIRLATENT_HAVE_VEC
    constexpr int64_t MR = 4;
    constexpr int64_t NR = 16;
    for (; j0 + NR <= n; j0 += NR) {
        int64_t i0 = 0;
        for (; i0 + MR <= m; i0 += MR) tile_4x16(c, a, b, k, n, i0, j0);
        for (; i0 < m; ++i0) {
            v8d acc0 = v8_splat(0.0), acc1 = acc0;
            const double* arow = a + i0 * k;
            for (int64_t p = 0; p < k; ++p) {
                const v8d av = v8_splat(arow[p]);
                acc0 += av * v8_load(b + p * n + j0);
                acc1 += av * v8_load(b + p * n + j0 + 8);
            }
            double* cp = c + i0 * n + j0;
            v8_store(cp, v8_load(cp) + acc0);
            v8_store(cp + 8, v8_load(cp + 8) + acc1);
        }
    }
    i_done = 0;  // the j tail below covers all rows
#endif
    if (j0 < n) {
        for (int64_t i = i_done; i < m; ++i) {
            double* cp = c + i * n;
            const double* arow = a + i * k;
            for (int64_t p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* bp = b + p * n;
                for (int64_t j = j0; j < n; ++j) cp[j] += av * bp[j];
            }
        }
    }
}

void transpose2d(double* out, const double* in, int64_t m, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
    }
}

void im2col(double* cols, const double* x, int64_t c, int64_t h, int64_t w, int64_t kh,
            int64_t kw, int stride, int pad, int64_t ho, int64_t wo) {
    const int64_t nloc = ho * wo;
    for (int64_t ch = 0; ch < c; ++ch) {
        const double* plane = x + ch * h * w;
        for (int64_t u = 0; u < kh; ++u) {
            for (int64_t v = 0; v < kw; ++v) {
                double* row = cols + ((ch * kh + u) * kw + v) * nloc;
                for (int64_t i = 0; i < ho; ++i) {
                    const int64_t src_i = i * stride - pad + u;
                    if (src_i < 0 || src_i >= h) {
                        std::fill(row + i * wo, row + (i + 1) * wo, 0.0);
                        continue;
                    }
                    const double* src = plane + src_i * w;
                    for (int64_t j = 0; j < wo; ++j) {
                        const int64_t src_j = j * stride - pad + v;
                        row[i * wo + j] = (src_j >= 0 && src_j < w) ? src[src_j] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(double* x, const double* cols, int64_t c, int64_t h, int64_t w, int64_t kh,
            int64_t kw, int stride, int pad, int64_t ho, int64_t wo) {
    const int64_t nloc = ho * wo;
    for (int64_t ch = 0; ch < c; ++ch) {
        double* plane = x + ch * h * w;
        for (int64_t u = 0; u < kh; ++u) {
            for (int64_t v = 0; v < kw; ++v) {
                const double* row = cols + ((ch * kh + u) * kw + v) * nloc;
                for (int64_t i = 0; i < ho; ++i) {
                    const int64_t dst_i = i * stride - pad + u;
                    if (dst_i < 0 || dst_i >= h) continue;
                    double* dst = plane + dst_i * w;
                    for (int64_t j = 0; j < wo; ++j) {
                        const int64_t dst_j = j * stride - pad + v;
                        if (dst_j >= 0 && dst_j < w) dst[dst_j] += row[i * wo + j];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// ---- linear algebra ----

namespace {

struct MatmulDims {
    int64_t batch;  // 1 when both operands are rank 2
    int64_t m, k, n;
    bool b_batched;
};

MatmulDims matmul_dims(const Tensor& a, const Tensor& b) {
    MatmulDims d{};
    if (a.rank() == 2 && b.rank() == 2) {
        d = {1, a.dim(0), a.dim(1), b.dim(1), false};
        if (b.dim(0) != d.k) throw ContractError("matmul: inner dims disagree");
    } else if (a.rank() == 3 && b.rank() == 2) {
        d = {a.dim(0), a.dim(1), a.dim(2), b.dim(1), false};
        if (b.dim(0) != d.k) throw ContractError("matmul: inner dims disagree");
    } else if (a.rank() == 3 && b.rank() == 3) {
        d = {a.dim(0), a.dim(1), a.dim(2), b.dim(2), true};
        if (b.dim(0) != d.batch || b.dim(1) != d.k) {
            throw ContractError("matmul: batched shapes disagree");
        }
    } else {
        throw ContractError("matmul: unsupported ranks " + shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
    }
    return d;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const MatmulDims d = matmul_dims(a, b);
    Tape* tape = common_tape({&a, &b});
    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<double> y(static_cast<size_t>(d.batch * d.m * d.n), 0.0);
    for (int64_t bt = 0; bt < d.batch; ++bt) {
        const double* bp = bd.data() + (d.b_batched ? bt * d.k * d.n : 0);
        detail::mm_acc(y.data() + bt * d.m * d.n, ad.data() + bt * d.m * d.k, bp, d.m, d.k, d.n);
    }
    Shape oshape = a.rank() == 2 ? Shape{d.m, d.n} : Shape{d.batch, d.m, d.n};
    Tensor out(std::move(oshape), std::move(y));
    if (!tape) return out;
    const int an = node_of(a), bn = node_of(b);
    return tape->emit(
        std::move(out), {an, bn},
        [an, bn, a, b, d](Tape& t, int self) {
            auto g = t.grad(self);
            const auto ad2 = a.data();
            const auto bd2 = b.data();
            if (an >= 0) {
                auto ga = t.grad_mut(an);
                std::vector<double> bt_scratch(static_cast<size_t>(d.n * d.k));
                for (int64_t bt = 0; bt < d.batch; ++bt) {
                    const double* bp = bd2.data() + (d.b_batched ? bt * d.k * d.n : 0);
                    detail::transpose2d(bt_scratch.data(), bp, d.k, d.n);
                    detail::mm_acc(ga.data() + bt * d.m * d.k, g.data() + bt * d.m * d.n,
                                   bt_scratch.data(), d.m, d.n, d.k);
                }
            }
            if (bn >= 0) {
                auto gb = t.grad_mut(bn);
                std::vector<double> at_scratch(static_cast<size_t>(d.k * d.m));
                for (int64_t bt = 0; bt < d.batch; ++bt) {
                    detail::transpose2d(at_scratch.data(), ad2.data() + bt * d.m * d.k, d.m, d.k);
                    detail::mm_acc(gb.data() + (d.b_batched ? bt * d.k * d.n : 0),
                                   at_scratch.data(), g.data() + bt * d.m * d.n, d.k, d.m, d.n);
                }
            }
        },
        "matmul");
}

Tensor bias_rows(const Tensor& x, const Tensor& bias) {
    const auto [rows, n] = last_axis_view(x, "bias_rows");
    if (bias.rank() != 1 || bias.dim(0) != n) {
        throw ContractError("bias_rows: bias must be [" + std::to_string(n) + "]");
    }
    Tape* tape = common_tape({&x, &bias});
    const auto xd = x.data();
    const auto bd = bias.data();
    std::vector<double> y(xd.size());
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < n; ++j) {
            y[static_cast<size_t>(r * n + j)] = xd[static_cast<size_t>(r * n + j)] + bd[static_cast<size_t>(j)];
        }
    }
    Tensor out(x.shape(), std::move(y));
    if (!tape) return out;
    const int xn = node_of(x), bnn = node_of(bias);
    const int64_t rows_c = rows, n_c = n;
    return tape->emit(
        std::move(out), {xn, bnn},
        [xn, bnn, rows_c, n_c](Tape& t, int self) {
            auto g = t.grad(self);
            if (xn >= 0) {
                auto gx = t.grad_mut(xn);
                for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (bnn >= 0) {
                auto gb = t.grad_mut(bnn);
                for (int64_t r = 0; r < rows_c; ++r) {
                    for (int64_t j = 0; j < n_c; ++j) gb[static_cast<size_t>(j)] += g[static_cast<size_t>(r * n_c + j)];
                }
            }
        },
        "bias_rows");
}

Tensor bias_nchw(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 4) throw ContractError("bias_nchw: input must be [b,c,h,w]");
    const int64_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (bias.rank() != 1 || bias.dim(0) != c) {
        throw ContractError("bias_nchw: bias must be [" + std::to_string(c) + "]");
    }
    Tape* tape = common_tape({&x, &bias});
    const auto xd = x.data();
    const auto bd = bias.data();
    std::vector<double> y(xd.size());
    for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const double bv = bd[static_cast<size_t>(ch)];
            const int64_t base = (bi * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) y[static_cast<size_t>(base + i)] = xd[static_cast<size_t>(base + i)] + bv;
        }
    }
    Tensor out(x.shape(), std::move(y));
    if (!tape) return out;
    const int xn = node_of(x), bnn = node_of(bias);
    return tape->emit(
        std::move(out), {xn, bnn},
        [xn, bnn, b, c, hw](Tape& t, int self) {
            auto g = t.grad(self);
            if (xn >= 0) {
                auto gx = t.grad_mut(xn);
                for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (bnn >= 0) {
                auto gb = t.grad_mut(bnn);
                for (int64_t bi = 0; bi < b; ++bi) {
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const int64_t base = (bi * c + ch) * hw;
                        double s = 0.0;
                        for (int64_t i = 0; i < hw; ++i) s += g[static_cast<size_t>(base + i)];
                        gb[static_cast<size_t>(ch)] += s;
                    }
                }
            }
        },
        "bias_nchw");
}

// ---- convolution ----

namespace {

struct ConvDims {
    int64_t b, c, h, w;    // input
    int64_t o, kh, kw;     // kernel
    int64_t ho, wo;        // output
    int stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& wt, int stride, int pad, bool transpose) {
    if (x.rank() != 4) throw ContractError("conv: input must be [b,c,h,w]");
    if (wt.rank() != 4) throw ContractError("conv: weight must be rank 4");
    if (stride < 1 || pad < 0) throw ContractError("conv: bad stride/pad");
    ConvDims d{};
    d.b = x.dim(0);
    d.c = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.stride = stride;
    d.pad = pad;
    if (!transpose) {
        if (wt.dim(1) != d.c) throw ContractError("conv2d: weight channel mismatch");
        d.o = wt.dim(0);
        d.kh = wt.dim(2);
        d.kw = wt.dim(3);
        const int64_t num_h = d.h + 2 * pad - d.kh;
        const int64_t num_w = d.w + 2 * pad - d.kw;
        if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0) {
            throw ContractError("conv2d: geometry does not tile exactly");
        }
        d.ho = num_h / stride + 1;
        d.wo = num_w / stride + 1;
    } else {
        if (wt.dim(0) != d.c) throw ContractError("conv2d_transpose: weight channel mismatch");
        d.o = wt.dim(1);
        d.kh = wt.dim(2);
        d.kw = wt.dim(3);
        d.ho = (d.h - 1) * stride - 2 * pad + d.kh;
        d.wo = (d.w - 1) * stride - 2 * pad + d.kw;
        if (d.ho < 1 || d.wo < 1) throw ContractError("conv2d_transpose: empty output");
    }
    return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    const ConvDims d = conv_dims(x, w, stride, pad, false);
    Tape* tape = common_tape({&x, &w});
    const int64_t ckk = d.c * d.kh * d.kw;
    const int64_t nloc = d.ho * d.wo;
    const auto xd = x.data();
    const auto wd = w.data();
    std::vector<double> y(static_cast<size_t>(d.b * d.o * nloc), 0.0);
    std::vector<double> cols(static_cast<size_t>(ckk * nloc));
    for (int64_t bi = 0; bi < d.b; ++bi) {
        detail::im2col(cols.data(), xd.data() + bi * d.c * d.h * d.w, d.c, d.h, d.w, d.kh, d.kw,
                       d.stride, d.pad, d.ho, d.wo);
        detail::mm_acc(y.data() + bi * d.o * nloc, wd.data(), cols.data(), d.o, ckk, nloc);
    }
    Tensor out(Shape{d.b, d.o, d.ho, d.wo}, std::move(y));
    if (!tape) return out;
    const int xn = node_of(x), wn = node_of(w);
    return tape->emit(
        std::move(out), {xn, wn},
        [xn, wn, x, w, d](Tape& t, int self) {
            const int64_t ckk2 = d.c * d.kh * d.kw;
            const int64_t nloc2 = d.ho * d.wo;
            auto g = t.grad(self);
            const auto xd2 = x.data();
            const auto wd2 = w.data();
            // Patches are recomputed here instead of kept from the forward
            // pass; the extra im2col is cheap next to the matmuls.
            std::vector<double> cols2(static_cast<size_t>(ckk2 * nloc2));
            std::vector<double> scratch;
            for (int64_t bi = 0; bi < d.b; ++bi) {
                const double* gb = g.data() + bi * d.o * nloc2;
                detail::im2col(cols2.data(), xd2.data() + bi * d.c * d.h * d.w, d.c, d.h, d.w,
                               d.kh, d.kw, d.stride, d.pad, d.ho, d.wo);
                if (wn >= 0) {
                    auto gw = t.grad_mut(wn);
                    scratch.resize(static_cast<size_t>(nloc2 * ckk2));
                    detail::transpose2d(scratch.data(), cols2.data(), ckk2, nloc2);
                    detail::mm_acc(gw.data(), gb, scratch.data(), d.o, nloc2, ckk2);
                }
                if (xn >= 0) {
                    auto gx = t.grad_mut(xn);
                    scratch.resize(static_cast<size_t>(ckk2 * d.o));
                    detail::transpose2d(scratch.data(), wd2.data(), d.o, ckk2);
                    std::vector<double> dcols(static_cast<size_t>(ckk2 * nloc2), 0.0);
                    detail::mm_acc(dcols.data(), scratch.data(), gb, ckk2, d.o, nloc2);
                    detail::col2im(gx.data() + bi * d.c * d.h * d.w, dcols.data(), d.c, d.h, d.w,
                                   d.kh, d.kw, d.stride, d.pad, d.ho, d.wo);
                }
            }
        },
        "conv2d");
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, int stride, int pad) {
    const ConvDims d = conv_dims(x, w, stride, pad, true);
    Tape* tape = common_tape({&x, &w});
    const int64_t okk = d.o * d.kh * d.kw;
    const int64_t hw = d.h * d.w;
    const auto xd = x.data();
    const auto wd = w.data();
    std::vector<double> wt(static_cast<size_t>(okk * d.c));
    detail::transpose2d(wt.data(), wd.data(), d.c, okk);
    std::vector<double> y(static_cast<size_t>(d.b * d.o * d.ho * d.wo), 0.0);
    std::vector<double> cols(static_cast<size_t>(okk * hw));
    for (int64_t bi = 0; bi < d.b; ++bi) {
        std::fill(cols.begin(), cols.end(), 0.0);
        detail::mm_acc(cols.data(), wt.data(), xd.data() + bi * d.c * hw, okk, d.c, hw);
        detail::col2im(y.data() + bi * d.o * d.ho * d.wo, cols.data(), d.o, d.ho, d.wo, d.kh, d.kw,
                       d.stride, d.pad, d.h, d.w);
    }
    Tensor out(Shape{d.b, d.o, d.ho, d.wo}, std::move(y));
    if (!tape) return out;
    const int xn = node_of(x), wn = node_of(w);
    return tape->emit(
        std::move(out), {xn, wn},
        [xn, wn, x, w, d](Tape& t, int self) {
            const int64_t okk2 = d.o * d.kh * d.kw;
            const int64_t hw2 = d.h * d.w;
            auto g = t.grad(self);
            const auto xd2 = x.data();
            const auto wd2 = w.data();
            std::vector<double> dcols(static_cast<size_t>(okk2 * hw2));
            std::vector<double> scratch;
            for (int64_t bi = 0; bi < d.b; ++bi) {
                detail::im2col(dcols.data(), g.data() + bi * d.o * d.ho * d.wo, d.o, d.ho, d.wo,
                               d.kh, d.kw, d.stride, d.pad, d.h, d.w);
                if (xn >= 0) {
                    auto gx = t.grad_mut(xn);
                    detail::mm_acc(gx.data() + bi * d.c * hw2, wd2.data(), dcols.data(), d.c, okk2,
                                   hw2);
                }
                if (wn >= 0) {
                    auto gw = t.grad_mut(wn);
                    scratch.resize(static_cast<size_t>(hw2 * okk2));
                    detail::transpose2d(scratch.data(), dcols.data(), okk2, hw2);
                    detail::mm_acc(gw.data(), xd2.data() + bi * d.c * hw2, scratch.data(), d.c,
                                   hw2, okk2);
                }
            }
        },
        "conv2d_transpose");
}

// ---- normalization / reductions ----

Tensor softmax(const Tensor& x) {
    const auto [slices, n] = last_axis_view(x, "softmax");
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    for (int64_t s = 0; s < slices; ++s) {
        const double* row = xd.data() + s * n;
        double mx = row[0];
        for (int64_t j = 0; j < n; ++j) {
            if (!std::isfinite(row[j])) throw NumericError("softmax: non-finite input");
            mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        double* yr = y.data() + s * n;
        for (int64_t j = 0; j < n; ++j) {
            yr[j] = std::exp(row[j] - mx);
            sum += yr[j];
        }
        for (int64_t j = 0; j < n; ++j) yr[j] /= sum;
    }
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    Tensor kept = out;
    const int64_t slices_c = slices, n_c = n;
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, kept, slices_c, n_c](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto yd = kept.data();
            for (int64_t s = 0; s < slices_c; ++s) {
                const double* yr = yd.data() + s * n_c;
                const double* gr = g.data() + s * n_c;
                double dot = 0.0;
                for (int64_t j = 0; j < n_c; ++j) dot += gr[j] * yr[j];
                for (int64_t j = 0; j < n_c; ++j) gx[static_cast<size_t>(s * n_c + j)] += yr[j] * (gr[j] - dot);
            }
        },
        "softmax");
}

Tensor simplex_normalize(const Tensor& x) {
    const auto [slices, n] = last_axis_view(x, "simplex_normalize");
    const auto xd = x.data();
    std::vector<double> y(xd.size());
    std::vector<double> sums(static_cast<size_t>(slices));
    for (int64_t s = 0; s < slices; ++s) {
        const double* row = xd.data() + s * n;
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            if (!(row[j] > 0.0)) throw DomainError("simplex_normalize: entries must be positive");
            sum += row[j];
        }
        sums[static_cast<size_t>(s)] = sum;
        double* yr = y.data() + s * n;
        for (int64_t j = 0; j < n; ++j) yr[j] = row[j] / sum;
    }
    Tensor out(x.shape(), std::move(y));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    Tensor kept = out;
    const int64_t slices_c = slices, n_c = n;
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, kept, sums, slices_c, n_c](Tape& t, int self) {
            auto g = t.grad(self);
            auto gx = t.grad_mut(xn);
            const auto yd = kept.data();
            for (int64_t s = 0; s < slices_c; ++s) {
                const double* yr = yd.data() + s * n_c;
                const double* gr = g.data() + s * n_c;
                const double inv_sum = 1.0 / sums[static_cast<size_t>(s)];
                double dot = 0.0;
                for (int64_t j = 0; j < n_c; ++j) dot += gr[j] * yr[j];
                for (int64_t j = 0; j < n_c; ++j) {
                    gx[static_cast<size_t>(s * n_c + j)] += (gr[j] - dot) * inv_sum;
                }
            }
        },
        "simplex_normalize");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const auto [slices, n] = last_axis_view(x, "layer_norm");
    if (gamma.rank() != 1 || gamma.dim(0) != n || beta.rank() != 1 || beta.dim(0) != n) {
        throw ContractError("layer_norm: gamma/beta must be [" + std::to_string(n) + "]");
    }
    Tape* tape = common_tape({&x, &gamma, &beta});
    const auto xd = x.data();
    const auto gd = gamma.data();
    const auto bd = beta.data();
    std::vector<double> y(xd.size());
    std::vector<double> xhat(xd.size());
    std::vector<double> inv_std(static_cast<size_t>(slices));
    for (int64_t s = 0; s < slices; ++s) {
        const double* row = xd.data() + s * n;
        double mu = 0.0;
        for (int64_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(s)] = is;
        for (int64_t j = 0; j < n; ++j) {
            const double xh = (row[j] - mu) * is;
            xhat[static_cast<size_t>(s * n + j)] = xh;
            y[static_cast<size_t>(s * n + j)] = xh * gd[static_cast<size_t>(j)] + bd[static_cast<size_t>(j)];
        }
    }
    Tensor out(x.shape(), std::move(y));
    if (!tape) return out;
    const int xn = node_of(x), gn = node_of(gamma), bn = node_of(beta);
    auto xhat_keep = std::make_shared<const std::vector<double>>(std::move(xhat));
    auto istd_keep = std::make_shared<const std::vector<double>>(std::move(inv_std));
    const int64_t slices_c = slices, n_c = n;
    return tape->emit(
        std::move(out), {xn, gn, bn},
        [xn, gn, bn, gamma, xhat_keep, istd_keep, slices_c, n_c](Tape& t, int self) {
            auto g = t.grad(self);
            const auto& xh = *xhat_keep;
            const auto& istd = *istd_keep;
            const auto gd2 = gamma.data();
            if (gn >= 0) {
                auto gg = t.grad_mut(gn);
                for (int64_t s = 0; s < slices_c; ++s) {
                    for (int64_t j = 0; j < n_c; ++j) {
                        gg[static_cast<size_t>(j)] += g[static_cast<size_t>(s * n_c + j)] * xh[static_cast<size_t>(s * n_c + j)];
                    }
                }
            }
            if (bn >= 0) {
                auto gb = t.grad_mut(bn);
                for (int64_t s = 0; s < slices_c; ++s) {
                    for (int64_t j = 0; j < n_c; ++j) gb[static_cast<size_t>(j)] += g[static_cast<size_t>(s * n_c + j)];
                }
            }
            if (xn >= 0) {
                auto gx = t.grad_mut(xn);
                const double inv_n = 1.0 / static_cast<double>(n_c);
                for (int64_t s = 0; s < slices_c; ++s) {
                    const double* gr = g.data() + s * n_c;
                    const double* xr = xh.data() + s * n_c;
                    double mean_gh = 0.0, mean_ghx = 0.0;
                    for (int64_t j = 0; j < n_c; ++j) {
                        const double gh = gr[j] * gd2[static_cast<size_t>(j)];
                        mean_gh += gh;
                        mean_ghx += gh * xr[j];
                    }
                    mean_gh *= inv_n;
                    mean_ghx *= inv_n;
                    const double is = istd[static_cast<size_t>(s)];
                    for (int64_t j = 0; j < n_c; ++j) {
                        const double gh = gr[j] * gd2[static_cast<size_t>(j)];
                        gx[static_cast<size_t>(s * n_c + j)] += (gh - mean_gh - xr[j] * mean_ghx) * is;
                    }
                }
            }
        },
        "layer_norm");
}

Tensor sum(const Tensor& x) {
    const auto xd = x.data();
    double s = 0.0;
    for (double v : xd) s += v;
    Tensor out = Tensor::scalar(s);
    if (!x.on_tape()) return out;
    const int xn = x.node();
    const int64_t n = x.size();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, n](Tape& t, int self) {
            const double g = t.grad(self)[0];
            auto gx = t.grad_mut(xn);
            for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>(i)] += g;
        },
        "sum");
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ContractError("mean: empty tensor");
    const auto xd = x.data();
    double s = 0.0;
    for (double v : xd) s += v;
    const int64_t n = x.size();
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    if (!x.on_tape()) return out;
    const int xn = x.node();
    return x.tape()->emit(
        std::move(out), {xn},
        [xn, n](Tape& t, int self) {
            const double g = t.grad(self)[0] / static_cast<double>(n);
            auto gx = t.grad_mut(xn);
            for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>(i)] += g;
        },
        "mean");
}

std::vector<int64_t> argmax_last(const Tensor& x) {
    const auto [slices, n] = last_axis_view(x, "argmax_last");
    const auto xd = x.data();
    std::vector<int64_t> idx(static_cast<size_t>(slices));
    for (int64_t s = 0; s < slices; ++s) {
        const double* row = xd.data() + s * n;
        int64_t best = 0;
        for (int64_t j = 1; j < n; ++j) {
            if (row[j] > row[best]) best = j;
        }
        idx[static_cast<size_t>(s)] = best;
    }
    return idx;
}

}  // namespace dirlatent::ops
