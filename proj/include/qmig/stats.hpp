#pragma once

// Scalar distribution functions used by the estimation routines.  Everything
// here is deterministic and allocation-free; accuracy targets are ~1e-12 in
// the central range, which is far tighter than anything the estimators need.

namespace qmig::stats {

inline constexpr double pi = 3.14159265358979323846;

// Standard normal density.
double norm_pdf(double z);

// Standard normal CDF via erfc; accurate in both tails.
double norm_cdf(double z);

// log(norm_cdf(z)) that stays finite deep in the left tail, where a naive
// log(norm_cdf) underflows to log(0).  Uses an asymptotic expansion of the
// Mills ratio for z < -10.
double norm_logcdf(double z);

// Numerically stable log(1 + exp(x)).
double log1pexp(double x);

// Logistic CDF 1 / (1 + exp(-x)) without overflow for large |x|.
double logistic_cdf(double x);

// Regularized incomplete beta I_x(a, b), evaluated with the Lentz continued
// fraction.  Needed for Student-t and F tail probabilities.
double incomplete_beta(double a, double b, double x);

// Two-sided p-value for a standard-normal test statistic.
double p_value_z(double z);

// Two-sided p-value for a Student-t statistic with df degrees of freedom.
double p_value_t(double t, double df);

// Upper-tail p-value for an F statistic with (df1, df2) degrees of freedom.
double p_value_f(double f, double df1, double df2);

} // namespace qmig::stats
