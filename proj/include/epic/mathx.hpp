#pragma once
// Scalar special functions and small statistical helpers shared across
// modules: normal CDF/quantile, inverse erf, regularized incomplete gamma,
// chi-square quantile, Kolmogorov-Smirnov statistic, moments.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace epic::mathx {

double normal_cdf(double z);
double normal_pdf(double z);

// inverse standard normal CDF (Wichura AS241, ~1e-15 relative accuracy)
double normal_quantile(double p);

// inverse of erf on (-1, 1)
double erf_inv(double x);

// regularized lower incomplete gamma P(a, x)
double gamma_p(double a, double x);

// chi-square quantile via bisection on gamma_p
double chi2_quantile(double p, double df);

// two-sided KS statistic of sorted values in [0,1] against Uniform(0,1)
double ks_statistic_uniform(std::span<const double> sorted_u);

// asymptotic KS p-value (Stephens small-sample modification)
double ks_pvalue(double d, std::size_t n);

double mean(std::span<const double> x);
double variance(std::span<const double> x);   // population variance
double sample_sd(std::span<const double> x);  // n-1 denominator, 0 for n<2

// log(sum(exp(x))) over a span, stable
double log_sum_exp(std::span<const double> x);

// Smallest s with cdf(s) >= t, by bracket expansion then bisection.
// lo/hi seed the bracket; tol is the absolute bracket width at stop.
double invert_monotone_cdf(const std::function<double(double)>& cdf, double t,
                           double lo, double hi, double tol);

} // namespace epic::mathx
