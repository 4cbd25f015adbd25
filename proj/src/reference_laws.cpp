#include "coupler/reference_laws.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "coupler/stats.hpp"

namespace coupler {

double scalar_law::quantile_integral(double lo, double hi) const {
    // ∫_u^1 F^{-1}(v) dv = E[(X - q)^+] + q (1 - u) with q = F^{-1}(u);
    // exact for atoms and continuous parts alike.
    auto upper = [this](double u) {
        if (u >= 1.0) return 0.0;
        const double q = quantile(u);
        return excess_mean(q) + q * (1.0 - u);
    };
    return upper(lo) - upper(hi);
}

namespace {

double checked_u(double u) {
    if (!(u >= 0.0) || u >= 1.0)
        throw std::invalid_argument("quantile: u outside [0,1)");
    return u;
}

class poisson_law final : public scalar_law {
public:
    explicit poisson_law(double mean) : mu_(mean) {
        if (!(mean >= 0.0) || !std::isfinite(mean))
            throw std::invalid_argument("poisson: mean must be nonnegative");
    }
    double quantile(double u) const override {
        return static_cast<double>(poisson_inverse(checked_u(u), mu_));
    }
    double cdf(double x) const override {
        if (x < 0.0) return 0.0;
        return poisson_cdf(static_cast<long long>(std::floor(x)), mu_);
    }
    double mean() const override { return mu_; }
    double excess_mean(double x) const override {
        if (x < 0.0) return mu_ - x;
        double total = 0.0;
        double pmf = std::exp(-mu_);
        double cdf = pmf;
        const long long start = static_cast<long long>(std::floor(x));
        for (long long k = 1; k <= start; ++k) {
            pmf *= mu_ / static_cast<double>(k);
            cdf += pmf;
        }
        // E[(X-x)^+] = sum_{k>floor(x)} (k-x) pmf(k); walk the upper tail.
        long long k = start;
        while (cdf < 1.0 - 1e-16 && k < start + 40 + 10 * static_cast<long long>(mu_ + 40.0 * std::sqrt(mu_ + 1.0))) {
            ++k;
            if (k == 0)
                pmf = std::exp(-mu_);
            else
                pmf *= mu_ / static_cast<double>(k);
            total += (static_cast<double>(k) - x) * pmf;
            cdf += pmf;
        }
        return total;
    }
    double sb_quantile(double u) const override {
        // size-biased Poisson(mu) is 1 + Poisson(mu)
        if (mu_ == 0.0) throw std::invalid_argument("poisson: zero mean has no size-biased law");
        return 1.0 + quantile(u);
    }
    bool integer_valued() const override { return true; }

private:
    double mu_;
};

class exp_law final : public scalar_law {
public:
    explicit exp_law(double rate) : rate_(rate) {
        if (!(rate > 0.0)) throw std::invalid_argument("exp: rate must be positive");
    }
    double quantile(double u) const override { return -std::log1p(-checked_u(u)) / rate_; }
    double cdf(double x) const override { return x <= 0.0 ? 0.0 : -std::expm1(-rate_ * x); }
    double mean() const override { return 1.0 / rate_; }
    double excess_mean(double x) const override {
        if (x <= 0.0) return mean() - x;
        return std::exp(-rate_ * x) / rate_;
    }
    double sb_quantile(double u) const override {
        // size-biased exponential is Gamma(2, rate); invert its CDF.
        checked_u(u);
        if (u == 0.0) return 0.0;
        double x = (-std::log1p(-u) + 1.0) / rate_; // start beyond the exp quantile
        for (int it = 0; it < 80; ++it) {
            const double z = rate_ * x;
            const double f = 1.0 - std::exp(-z) * (1.0 + z) - u;
            const double fp = rate_ * z * std::exp(-z);
            if (fp <= 0.0) break;
            const double step = f / fp;
            x -= step;
            if (x <= 0.0) x = 1e-12 / rate_;
            if (std::abs(step) < 1e-14 * (1.0 + x)) break;
        }
        return x;
    }
    bool integer_valued() const override { return false; }

private:
    double rate_;
};

class constant_law final : public scalar_law {
public:
    explicit constant_law(double v) : v_(v) {
        if (!std::isfinite(v)) throw std::invalid_argument("constant: value must be finite");
    }
    double quantile(double u) const override {
        checked_u(u);
        return v_;
    }
    double cdf(double x) const override { return x >= v_ ? 1.0 : 0.0; }
    double mean() const override { return v_; }
    double excess_mean(double x) const override { return std::max(v_ - x, 0.0); }
    double sb_quantile(double u) const override {
        if (v_ <= 0.0) throw std::invalid_argument("constant: size-bias needs positive value");
        checked_u(u);
        return v_;
    }
    bool integer_valued() const override { return v_ == std::floor(v_); }

private:
    double v_;
};

/// Generic finitely-supported or fast-decaying integer law described by an
/// explicit pmf walk; used for geometric, uniform_int and zeta.
class discrete_walk_law : public scalar_law {
public:
    double quantile(double u) const override {
        checked_u(u);
        double cum = 0.0;
        for (long long k = first(); k <= last_k(); ++k) {
            cum += pmf(k);
            if (cum >= u || k == last_k()) return static_cast<double>(k);
        }
        return static_cast<double>(last_k());
    }
    double cdf(double x) const override {
        if (x < static_cast<double>(first())) return 0.0;
        const long long m = static_cast<long long>(std::floor(x));
        double cum = 0.0;
        for (long long k = first(); k <= std::min(m, last_k()); ++k) cum += pmf(k);
        return std::min(cum, 1.0);
    }
    double excess_mean(double x) const override {
        double total = 0.0;
        for (long long k = first(); k <= last_k(); ++k) {
            const double gap = static_cast<double>(k) - x;
            if (gap > 0.0) total += gap * pmf(k);
        }
        return total;
    }
    double sb_quantile(double u) const override {
        checked_u(u);
        const double m = mean();
        if (!(m > 0.0)) throw std::invalid_argument("size-bias needs positive mean");
        double cum = 0.0;
        for (long long k = first(); k <= last_k(); ++k) {
            cum += static_cast<double>(k) * pmf(k) / m;
            if (cum >= u || k == last_k()) return static_cast<double>(k);
        }
        return static_cast<double>(last_k());
    }
    bool integer_valued() const override { return true; }

protected:
    virtual long long first() const = 0;
    virtual long long last_k() const = 0; // inclusive cap, pmf beyond is negligible or zero
    virtual double pmf(long long k) const = 0;
};

class geometric_law final : public discrete_walk_law {
public:
    explicit geometric_law(double p) : p_(p) {
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("geometric: p in (0,1] required");
        cap_ = p >= 1.0 ? 0 : static_cast<long long>(std::ceil(80.0 / -std::log1p(-p))) + 2;
    }
    double mean() const override { return (1.0 - p_) / p_; }
    double excess_mean(double x) const override {
        // closed form: sum_{k>m} (k-x) p s^k = s^{m+1} ((m+1-x) + s/p)
        const double s = 1.0 - p_;
        const long long m = x < 0.0 ? -1 : static_cast<long long>(std::floor(x));
        return std::pow(s, static_cast<double>(m + 1)) * ((static_cast<double>(m + 1) - x) + s / p_);
    }

protected:
    long long first() const override { return 0; }
    long long last_k() const override { return cap_; }
    double pmf(long long k) const override { return p_ * std::pow(1.0 - p_, static_cast<double>(k)); }

private:
    double p_;
    long long cap_;
};

class uniform_int_law final : public discrete_walk_law {
public:
    uniform_int_law(double lo, double hi)
        : lo_(static_cast<long long>(lo)), hi_(static_cast<long long>(hi)) {
        if (hi_ < lo_) throw std::invalid_argument("uniform_int: hi < lo");
    }
    double mean() const override { return 0.5 * static_cast<double>(lo_ + hi_); }

protected:
    long long first() const override { return lo_; }
    long long last_k() const override { return hi_; }
    double pmf(long long) const override { return 1.0 / static_cast<double>(hi_ - lo_ + 1); }

private:
    long long lo_, hi_;
};

class zeta_law final : public discrete_walk_law {
public:
    explicit zeta_law(double alpha) : alpha_(alpha) {
        if (!(alpha > 2.0))
            throw std::invalid_argument("zeta: alpha > 2 required for a finite mean");
        norm_ = riemann_zeta(alpha_);
        mean_ = riemann_zeta(alpha_ - 1.0) / norm_;
    }
    double mean() const override { return mean_; }
    double sb_quantile(double u) const override {
        // size-biased zeta(alpha) is zeta(alpha - 1)
        checked_u(u);
        const double norm_b = riemann_zeta(alpha_ - 1.0);
        double cum = 0.0;
        for (long long k = 1; k <= last_k(); ++k) {
            cum += std::pow(static_cast<double>(k), 1.0 - alpha_) / norm_b;
            if (cum >= u || k == last_k()) return static_cast<double>(k);
        }
        return static_cast<double>(last_k());
    }

protected:
    long long first() const override { return 1; }
    long long last_k() const override { return 1 << 22; }
    double pmf(long long k) const override {
        return std::pow(static_cast<double>(k), -alpha_) / norm_;
    }

private:
    static double riemann_zeta(double s) {
        const int n = 200000;
        double sum = 0.0;
        for (int k = 1; k <= n; ++k) sum += std::pow(static_cast<double>(k), -s);
        // Euler-Maclaurin tail
        const double dn = static_cast<double>(n);
        return sum + std::pow(dn, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(dn, -s);
    }
    double alpha_, norm_, mean_;
};

class gaussian_law final : public scalar_law {
public:
    explicit gaussian_law(double sigma) : sigma_(sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("gaussian: sigma must be positive");
    }
    double quantile(double u) const override {
        checked_u(u);
        if (u == 0.0) return -38.0 * sigma_;
        return sigma_ * normal_quantile(u);
    }
    double cdf(double x) const override { return 0.5 * std::erfc(-x / (sigma_ * std::sqrt(2.0))); }
    double mean() const override { return 0.0; }
    double excess_mean(double x) const override {
        const double z = x / sigma_;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        return sigma_ * (pdf - z * (1.0 - cdf(x)));
    }
    double sb_quantile(double) const override {
        throw std::logic_error("gaussian: not a valid size-bias coordinate");
    }
    bool integer_valued() const override { return false; }

private:
    double sigma_;
};

class uniform01_law final : public scalar_law {
public:
    double quantile(double u) const override { return checked_u(u); }
    double cdf(double x) const override { return std::clamp(x, 0.0, 1.0); }
    double mean() const override { return 0.5; }
    double excess_mean(double x) const override {
        if (x <= 0.0) return 0.5 - x;
        if (x >= 1.0) return 0.0;
        return 0.5 * (1.0 - x) * (1.0 - x);
    }
    double sb_quantile(double u) const override {
        // density 2x on [0,1]
        return std::sqrt(checked_u(u));
    }
    bool integer_valued() const override { return false; }
};

} // namespace

std::unique_ptr<scalar_law> make_scalar_law(const law_spec& spec) {
    if (spec.kind == "poisson") return std::make_unique<poisson_law>(spec.a);
    if (spec.kind == "exp") return std::make_unique<exp_law>(spec.a);
    if (spec.kind == "constant") return std::make_unique<constant_law>(spec.a);
    if (spec.kind == "geometric") return std::make_unique<geometric_law>(spec.a);
    if (spec.kind == "uniform_int") return std::make_unique<uniform_int_law>(spec.a, spec.b);
    if (spec.kind == "zeta") return std::make_unique<zeta_law>(spec.a);
    if (spec.kind == "gaussian") return std::make_unique<gaussian_law>(spec.a);
    if (spec.kind == "uniform") return std::make_unique<uniform01_law>();
    throw std::invalid_argument("unknown law kind: " + spec.kind);
}

} // namespace coupler
