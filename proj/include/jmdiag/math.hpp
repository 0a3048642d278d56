#pragma once

#include <cstdint>

// Scalar special functions used across the library. All are deterministic,
// thread-safe, and accurate to near double precision unless noted.
namespace jmdiag {

// Standard normal CDF and its inverse (Wichura's PPND16, ~1e-15 relative).
double norm_cdf(double x);
double norm_quantile(double p);

// Regularized incomplete gamma P(a,x) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Chi-square CDF with nu degrees of freedom.
double chisq_cdf(double x, double nu);

// Regularized incomplete beta I_x(a,b) and its inverse in x.
double beta_inc(double a, double b, double x);
double beta_quantile(double p, double a, double b);

// Kolmogorov-Smirnov null distribution.
// Exact P(D_n < d) by the Marsaglia-Tsang-Wang matrix method.
double ks_cdf_exact(int n, double d);
// Limiting Kolmogorov law: P(sqrt(n) D_n > t) = 2 sum_j (-1)^{j-1} exp(-2 j^2 t^2).
double kolmogorov_asymptotic_sf(double t);

// Exact binomial (Clopper-Pearson) confidence interval for a proportion.
struct Interval {
  double lower;
  double upper;
};
Interval clopper_pearson(int successes, int trials, double confidence = 0.95);

// Binomial CDF P(X <= m) for X ~ Bin(n, p).
double binomial_cdf(int m, int n, double p);
// Smallest m with P(X <= m) >= prob (binomial quantile).
int binomial_quantile(double prob, int n, double p);

}  // namespace jmdiag
