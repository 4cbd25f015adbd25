#pragma once

#include <memory>
#include <string>

#include "coupler/rng.hpp"

namespace coupler {

/// A 1-D reference law exposed through its quantile function. All sampling
/// is inverse-CDF so that draws are deterministic functions of the uniform
/// stream and comonotone couplings come for free.
class scalar_law {
public:
    virtual ~scalar_law() = default;

    /// F^{-1}(u) for u in [0,1).
    virtual double quantile(double u) const = 0;
    /// P(X <= x).
    virtual double cdf(double x) const = 0;
    virtual double mean() const = 0;
    /// E[(X - x)^+].
    virtual double excess_mean(double x) const = 0;
    /// Quantile of the size-biased law (reweighted by the value itself).
    /// Only meaningful for nonnegative laws with finite positive mean.
    virtual double sb_quantile(double u) const = 0;
    virtual bool integer_valued() const = 0;

    double sample(rng_stream& rng) const { return quantile(rng.next_u01()); }
    double sb_sample(rng_stream& rng) const { return sb_quantile(rng.next_u01()); }

    // ∫_lo^hi F^{-1}(u) du, exact given quantile/excess_mean.
    double quantile_integral(double lo, double hi) const;
};

struct law_spec {
    std::string kind; // poisson | exp | constant | geometric | uniform_int | zeta | gaussian | uniform
    double a = 0.0;   // mean / rate / value / p / lo / alpha / sigma
    double b = 0.0;   // hi (uniform_int only)
};

std::unique_ptr<scalar_law> make_scalar_law(const law_spec& spec);

} // namespace coupler
