#pragma once

#include "dirlatent/errors.hpp"
#include "dirlatent/rng.hpp"

// Scalar special functions backing the Dirichlet machinery. All functions are
// pure; absolute error is at or below 1e-10 for arguments in [1e-3, 1e3]
// unless a function documents otherwise. Arguments outside a function's
// mathematical domain raise DomainError.
namespace dirlatent::special {

// ln Gamma(x) for x > 0 (Lanczos, g = 7; small arguments are lifted with
// ln Gamma(x) = ln Gamma(x+1) - ln x).
double log_gamma(double x);

// psi(x) = d/dx ln Gamma(x) for x > 0. The argument is recurrence-shifted to
// >= 6, then the Bernoulli asymptotic series is applied through the x^-12
// term (series truncation below 1e-12 at the threshold).
double digamma(double x);

// psi'(x) for x > 0, by the same shift-then-series scheme through x^-13.
double trigamma(double x);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0. Power series
// for x < a + 1, Lentz continued fraction otherwise; both run to a 1e-12
// relative termination.
double reg_inc_gamma_p(double a, double x);

// Inverse of P(a, .) on x: returns x with P(a, x) = p for p in [0, 1).
// Bracketed Newton on reg_inc_gamma_p; smooth in both arguments, which is
// what the pathwise sampling gradients in the Dirichlet layer rely on.
double inv_reg_inc_gamma_p(double a, double p);

// One draw from Gamma(shape, 1). Squeeze/accept for shape >= 1; shapes below
// 1 are boosted to shape + 1 and corrected with a uniform power. The draw
// sequence is pinned by the rng state.
double sample_gamma(double shape, Rng& rng);

}  // namespace dirlatent::special
