#ifndef CODETUNE_STATS_HPP
#define CODETUNE_STATS_HPP

namespace codetune {

/// Regularized incomplete beta function I_x(a, b), a, b > 0, x in [0, 1].
/// Continued-fraction evaluation (modified Lentz).
double incomplete_beta(double a, double b, double x);

/// CDF of the F distribution with (d1, d2) degrees of freedom.
double f_cdf(double x, int d1, int d2);

/// Upper alpha quantile of the F distribution: the value f with
/// P(F > f) = alpha. Monotone decreasing in alpha.
double f_quantile(double alpha, int d1, int d2);

}  // namespace codetune

#endif
