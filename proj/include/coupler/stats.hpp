#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace coupler {

class scalar_law;

/// Smallest m with P(Poisson(lambda) <= m) >= u, i.e. the pseudoinverse of
/// the Poisson distribution function, evaluated by forward CDF accumulation.
/// The search is capped at lambda + 20*sqrt(lambda) + 100; reaching the cap
/// is numerically impossible for u representable in double precision.
long long poisson_inverse(double u, double lambda);

/// P(Poisson(lambda) <= m); returns 0 for m < 0.
double poisson_cdf(long long m, double lambda);

/// Exact Wasserstein-1 distance between the empirical measures of two 1-D
/// samples (integral of quantile gaps over a merged quantile grid).
double w1_quantile(std::vector<double> a, std::vector<double> b);

/// Exact W1 between the empirical measure of a sample and a reference law
/// given by its quantile function.
double w1_quantile(std::vector<double> a, const scalar_law& law);

/// Exact optimal transport cost between two small weighted point sets under
/// an explicit cost matrix; supports are capped at 64 points each.
double w1_exact_discrete(const std::vector<double>& weight_a,
                         const std::vector<double>& weight_b,
                         const std::vector<std::vector<double>>& cost);

/// Convenience overload for 1-D supports with |x - y| ground metric.
double w1_exact_discrete(const std::vector<double>& points_a, const std::vector<double>& weight_a,
                         const std::vector<double>& points_b, const std::vector<double>& weight_b);

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                          double level);

/// Inverse standard normal CDF (Acklam's rational approximation, refined by
/// one Halley step; absolute error well below 1e-12).
double normal_quantile(double p);

} // namespace coupler
