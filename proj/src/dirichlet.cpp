#include "dirlatent/dirichlet.hpp"

#include <cmath>

#include "dirlatent/errors.hpp"
#include "dirlatent/special.hpp"

namespace dirlatent::dirichlet {

namespace {

// Draws below this are clamped before normalization: at extreme small
// concentrations the inverse CDF underflows double range, and a hard zero
// would poison both the simplex constraint and the backward pass. The floor
// sits far below anything reachable from 64-bit uniforms at concentrations
// of practical interest (a shape-0.1 draw bottoms out near 1e-193), so it
// only catches genuine underflow and leaves the sampled law unbiased.
constexpr double kMinGammaDraw = 1e-300;

int64_t last_dim(const Tensor& t, const char* op) {
    if (t.rank() < 1 || t.dim(t.rank() - 1) < 2) {
        throw ContractError(std::string(op) + ": needs a concentration axis of dim >= 2, got " +
                            shape_str(t.shape()));
    }
    return t.dim(t.rank() - 1);
}

double gamma_log_pdf(double a, double x) {
    return (a - 1.0) * std::log(x) - x - special::log_gamma(a);
}

// d g / d alpha at fixed uniform, via the implicit function P(alpha, g) = u.
double gamma_draw_dalpha(double a, double g) {
    const double h = std::min(1e-5, 0.5 * a);
    const double dp_da =
        (special::reg_inc_gamma_p(a + h, g) - special::reg_inc_gamma_p(a - h, g)) / (2.0 * h);
    return -dp_da * std::exp(-gamma_log_pdf(a, g));
}

}  // namespace

void check_concentration(std::span<const double> alpha) {
    if (alpha.size() < 2) throw ContractError("concentration: needs dimension >= 2");
    for (double a : alpha) {
        if (!(a > 0.0)) throw ContractError("concentration: entries must be positive");
    }
}

double log_pdf(std::span<const double> w, std::span<const double> alpha) {
    check_concentration(alpha);
    if (w.size() != alpha.size()) throw ContractError("log_pdf: dimension mismatch");
    double asum = 0.0, lg = 0.0, dot = 0.0;
    for (size_t k = 0; k < alpha.size(); ++k) {
        asum += alpha[k];
        lg += special::log_gamma(alpha[k]);
        if (w[k] > 0.0) {
            dot += (alpha[k] - 1.0) * std::log(w[k]);
        } else if (alpha[k] < 1.0) {
            return -std::numeric_limits<double>::infinity();
        } else if (alpha[k] > 1.0) {
            // density vanishes on this boundary face
            return -std::numeric_limits<double>::infinity();
        }
    }
    return special::log_gamma(asum) - lg + dot;
}

double kl_divergence(std::span<const double> q, std::span<const double> p) {
    check_concentration(q);
    check_concentration(p);
    if (q.size() != p.size()) throw ContractError("kl_divergence: dimension mismatch");
    double qs = 0.0, ps = 0.0;
    for (size_t k = 0; k < q.size(); ++k) {
        qs += q[k];
        ps += p[k];
    }
    double kl = special::log_gamma(qs) - special::log_gamma(ps);
    const double psi_qs = special::digamma(qs);
    for (size_t k = 0; k < q.size(); ++k) {
        kl += special::log_gamma(p[k]) - special::log_gamma(q[k]);
        kl += (q[k] - p[k]) * (special::digamma(q[k]) - psi_qs);
    }
    return kl;
}

std::vector<double> mean(std::span<const double> alpha) {
    check_concentration(alpha);
    double s = 0.0;
    for (double a : alpha) s += a;
    std::vector<double> m(alpha.size());
    for (size_t k = 0; k < alpha.size(); ++k) m[k] = alpha[k] / s;
    return m;
}

std::vector<double> sample(std::span<const double> alpha, Rng& rng) {
    check_concentration(alpha);
    std::vector<double> g(alpha.size());
    double s = 0.0;
    for (size_t k = 0; k < alpha.size(); ++k) {
        g[k] = std::max(special::sample_gamma(alpha[k], rng), kMinGammaDraw);
        s += g[k];
    }
    for (double& v : g) v /= s;
    return g;
}

Tensor sample_on_tape(const Tensor& alpha, Rng& rng) {
    const int64_t n = last_dim(alpha, "sample_on_tape");
    const int64_t rows = alpha.size() / n;
    const auto ad = alpha.data();
    std::vector<double> g(ad.size());
    std::vector<double> w(ad.size());
    for (int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int64_t k = 0; k < n; ++k) {
            const double a = ad[static_cast<size_t>(r * n + k)];
            if (!(a > 0.0)) throw ContractError("sample_on_tape: concentrations must be positive");
            const double draw = special::inv_reg_inc_gamma_p(a, rng.uniform());
            g[static_cast<size_t>(r * n + k)] = std::max(draw, kMinGammaDraw);
            s += g[static_cast<size_t>(r * n + k)];
        }
        for (int64_t k = 0; k < n; ++k) {
            w[static_cast<size_t>(r * n + k)] = g[static_cast<size_t>(r * n + k)] / s;
        }
    }
    Tensor out(alpha.shape(), std::move(w));
    if (!alpha.on_tape()) return out;
    const int an = alpha.node();
    Tensor kept = out;
    auto g_keep = std::make_shared<const std::vector<double>>(std::move(g));
    return alpha.tape()->emit(
        std::move(out), {an},
        [an, alpha, kept, g_keep, rows, n](Tape& t, int self) {
            auto grad = t.grad(self);
            auto ga = t.grad_mut(an);
            const auto ad2 = alpha.data();
            const auto wd = kept.data();
            const auto& gd = *g_keep;
            for (int64_t r = 0; r < rows; ++r) {
                double s = 0.0, dot = 0.0;
                for (int64_t k = 0; k < n; ++k) {
                    s += gd[static_cast<size_t>(r * n + k)];
                    dot += grad[static_cast<size_t>(r * n + k)] * wd[static_cast<size_t>(r * n + k)];
                }
                for (int64_t k = 0; k < n; ++k) {
                    const size_t i = static_cast<size_t>(r * n + k);
                    // dL/dg_k through w = g / s, then dg/dalpha.
                    const double dl_dg = (grad[i] - dot) / s;
                    ga[i] += dl_dg * gamma_draw_dalpha(ad2[i], gd[i]);
                }
            }
        },
        "dirichlet_sample");
}

Tensor kl_to_symmetric_prior(const Tensor& alpha, double prior) {
    if (!(prior > 0.0)) throw ContractError("kl_to_symmetric_prior: prior must be positive");
    const int64_t n = last_dim(alpha, "kl_to_symmetric_prior");
    const int64_t rows = alpha.size() / n;
    const auto ad = alpha.data();
    const double nn = static_cast<double>(n);
    const double lg_p_terms = special::log_gamma(prior * nn) - nn * special::log_gamma(prior);
    std::vector<double> kl(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        double qs = 0.0;
        for (int64_t k = 0; k < n; ++k) {
            const double q = ad[static_cast<size_t>(r * n + k)];
            if (!(q > 0.0)) {
                throw ContractError("kl_to_symmetric_prior: concentrations must be positive");
            }
            qs += q;
        }
        double acc = special::log_gamma(qs) - lg_p_terms;
        const double psi_qs = special::digamma(qs);
        for (int64_t k = 0; k < n; ++k) {
            const double q = ad[static_cast<size_t>(r * n + k)];
            acc -= special::log_gamma(q);
            acc += (q - prior) * (special::digamma(q) - psi_qs);
        }
        kl[static_cast<size_t>(r)] = acc;
    }
    Shape oshape(alpha.shape().begin(), alpha.shape().end() - 1);
    Tensor out(std::move(oshape), std::move(kl));
    if (!alpha.on_tape()) return out;
    const int an = alpha.node();
    return alpha.tape()->emit(
        std::move(out), {an},
        [an, alpha, rows, n, prior](Tape& t, int self) {
            auto grad = t.grad(self);
            auto ga = t.grad_mut(an);
            const auto ad2 = alpha.data();
            const double pr_total = prior * static_cast<double>(n);
            for (int64_t r = 0; r < rows; ++r) {
                const double go = grad[static_cast<size_t>(r)];
                if (go == 0.0) continue;
                double qs = 0.0;
                for (int64_t k = 0; k < n; ++k) qs += ad2[static_cast<size_t>(r * n + k)];
                const double common = (qs - pr_total) * special::trigamma(qs);
                for (int64_t k = 0; k < n; ++k) {
                    const size_t i = static_cast<size_t>(r * n + k);
                    ga[i] += go * ((ad2[i] - prior) * special::trigamma(ad2[i]) - common);
                }
            }
        },
        "dirichlet_kl");
}

}  // namespace dirlatent::dirichlet
