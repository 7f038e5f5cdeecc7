#pragma once

namespace msa {

// Regularized incomplete gamma functions, a > 0, x >= 0. Series expansion
// below x = a + 1, Lentz continued fraction above.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double df);

// P(|Z| >= |z|) for a standard normal Z.
double two_sided_normal_p(double z);

// P(X >= successes) for X ~ Binomial(trials, 1/2), exact.
double binomial_half_upper_tail(int successes, int trials);

}  // namespace msa
