#pragma once

#include <span>
#include <vector>

#include "dirlatent/rng.hpp"
#include "dirlatent/tensor.hpp"

// Dirichlet distribution: density, closed-form KL, moments, and
// differentiable sampling for the variational posterior. Plain functions
// operate on raw concentration vectors; the *_on_tape entries treat the last
// tensor axis as the concentration dimension, one distribution per row.
namespace dirlatent::dirichlet {

// Every concentration entry must be positive; dimension >= 2.
void check_concentration(std::span<const double> alpha);

// log Dir(w | alpha). Boundary w with some alpha_k < 1 yields -inf (the
// density diverges there, but callers get a usable sentinel instead of NaN).
double log_pdf(std::span<const double> w, std::span<const double> alpha);

// KL(Dir(q) || Dir(p)), closed form:
//   lnG(Q) - sum lnG(q_k) - lnG(P) + sum lnG(p_k)
//   + sum (q_k - p_k) (psi(q_k) - psi(Q)),      Q = sum q, P = sum p.
double kl_divergence(std::span<const double> q, std::span<const double> p);

// alpha / sum(alpha).
std::vector<double> mean(std::span<const double> alpha);

// One draw via normalized Gamma variates (fast path, no gradients).
std::vector<double> sample(std::span<const double> alpha, Rng& rng);

// Differentiable draw, one distribution per row of alpha[..., N]. The draw
// uses inverse-CDF Gamma variates g_k = P^{-1}(alpha_k, u_k), so for fixed
// rng state the output is a smooth function of alpha and the backward pass
// is the exact path derivative (implicit reparameterization):
//   dg/dalpha = -(dP/dalpha)(alpha, g) / pdf_Gamma(alpha, g),
// with dP/dalpha by central difference (step 1e-5, shrunk near the domain
// edge), chained through the normalization w = g / sum(g).
Tensor sample_on_tape(const Tensor& alpha, Rng& rng);

// Per-row KL(Dir(row) || Dir(prior * 1)) for alpha[..., N]; output drops the
// last axis. Gradient: dKL/dq_j = (q_j - p) psi'(q_j) - (Q - P) psi'(Q).
Tensor kl_to_symmetric_prior(const Tensor& alpha, double prior);

}  // namespace dirlatent::dirichlet
