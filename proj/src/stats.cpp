#include "coupler/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coupler/reference_laws.hpp"

namespace coupler {

namespace {

long long poisson_cap(double lambda) {
    return static_cast<long long>(lambda + 20.0 * std::sqrt(lambda) + 100.0);
}

// Forward pmf/CDF recursion anchored at the mode; stable for large lambda
// where exp(-lambda) underflows.
double poisson_cdf_large(long long m, double lambda) {
    const long long mode = static_cast<long long>(lambda);
    const double log_pmf_mode = static_cast<double>(mode) * std::log(lambda) - lambda -
                                std::lgamma(static_cast<double>(mode) + 1.0);
    // lower part: walk down from the mode
    double below = 0.0;
    {
        double term = 1.0; // pmf(k)/pmf(mode)
        for (long long k = mode; k >= 0; --k) {
            below += term;
            if (term < 1e-19 * below) break;
            term *= static_cast<double>(k) / lambda; // pmf(k-1)/pmf(mode)
        }
    }
    double cum; // sum of pmf(k)/pmf(mode) for k <= m
    if (m >= mode) {
        cum = below;
        double term = 1.0;
        for (long long k = mode + 1; k <= m; ++k) {
            term *= lambda / static_cast<double>(k);
            cum += term;
            if (term < 1e-19 * cum) {
                cum += term * (lambda / static_cast<double>(k + 1)) /
                       (1.0 - lambda / static_cast<double>(k + 1));
                break;
            }
        }
    } else {
        cum = 0.0;
        double term = 1.0;
        for (long long k = mode; k >= 0; --k) {
            if (k <= m) cum += term;
            term *= static_cast<double>(k) / lambda;
            if (k <= m && term < 1e-19 * cum) break;
        }
    }
    return std::min(1.0, cum * std::exp(log_pmf_mode));
}

} // namespace

double poisson_cdf(long long m, double lambda) {
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw std::invalid_argument("poisson_cdf: lambda must be finite and nonnegative");
    if (m < 0) return 0.0;
    if (lambda == 0.0) return 1.0;
    if (lambda > 700.0) return poisson_cdf_large(m, lambda);
    double pmf = std::exp(-lambda);
    double cum = pmf;
    for (long long k = 1; k <= m; ++k) {
        pmf *= lambda / static_cast<double>(k);
        cum += pmf;
        if (pmf < 1e-19 * cum && static_cast<double>(k) > lambda) break;
    }
    return std::min(cum, 1.0);
}

long long poisson_inverse(double u, double lambda) {
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw std::invalid_argument("poisson_inverse: lambda must be finite and nonnegative");
    if (!(u >= 0.0) || u >= 1.0)
        throw std::invalid_argument("poisson_inverse: u outside [0,1)");
    if (lambda == 0.0) return 0;
    const long long cap = poisson_cap(lambda);
    if (lambda > 700.0) {
        // bracketed search on the mode-anchored CDF
        long long lo = 0, hi = cap;
        while (lo < hi) {
            const long long mid = lo + (hi - lo) / 2;
            if (poisson_cdf_large(mid, lambda) >= u)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }
    double pmf = std::exp(-lambda);
    double cum = pmf;
    long long m = 0;
    while (cum < u && m < cap) {
        ++m;
        pmf *= lambda / static_cast<double>(m);
        cum += pmf;
    }
    return m;
}

double w1_quantile(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("w1_quantile: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t na = a.size(), nb = b.size();
    double total = 0.0;
    std::size_t i = 0, j = 0;
    double u = 0.0;
    while (i < na && j < nb) {
        const double ua = static_cast<double>(i + 1) / static_cast<double>(na);
        const double ub = static_cast<double>(j + 1) / static_cast<double>(nb);
        const double next = std::min(ua, ub);
        total += (next - u) * std::abs(a[i] - b[j]);
        u = next;
        if (ua <= next) ++i;
        if (ub <= next) ++j;
    }
    return total;
}

double w1_quantile(std::vector<double> a, const scalar_law& law) {
    if (a.empty()) throw std::invalid_argument("w1_quantile: empty sample");
    if (!std::isfinite(law.mean()))
        throw std::invalid_argument("w1_quantile: law lacks a first moment");
    std::sort(a.begin(), a.end());
    const std::size_t n = a.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        // F^{-1} <= a[i] exactly on [lo, u*] with u* = F(a[i])
        const double cross = std::clamp(law.cdf(a[i]), lo, hi);
        total += a[i] * (cross - lo) - law.quantile_integral(lo, cross);
        total += law.quantile_integral(cross, hi) - a[i] * (hi - cross);
    }
    return total;
}

namespace {

// Dense min-cost flow: successive shortest paths with Dijkstra on reduced
// costs. Real-valued capacities; supports are tiny so O(V^2) Dijkstra is fine.
class transport_solver {
public:
    transport_solver(int n_nodes) : n_(n_nodes), head_(n_nodes, -1) {}

    void add_edge(int u, int v, double cap, double cost) {
        edges_.push_back({v, head_[u], cap, cost});
        head_[u] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({u, head_[v], 0.0, -cost});
        head_[v] = static_cast<int>(edges_.size()) - 1;
    }

    double min_cost_flow(int s, int t, double flow_target) {
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<double> pot(n_, 0.0);
        double total_cost = 0.0;
        double pushed = 0.0;
        int guard = 8 * n_ * n_;
        while (flow_target - pushed > 1e-13 && guard-- > 0) {
            std::vector<double> dist(n_, inf);
            std::vector<int> prev_edge(n_, -1);
            std::vector<bool> done(n_, false);
            dist[s] = 0.0;
            for (int it = 0; it < n_; ++it) {
                int u = -1;
                for (int v = 0; v < n_; ++v)
                    if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[u])) u = v;
                if (u < 0) break;
                done[u] = true;
                for (int e = head_[u]; e >= 0; e = edges_[e].next) {
                    if (edges_[e].cap <= 1e-15) continue;
                    const int v = edges_[e].to;
                    const double nd = dist[u] + edges_[e].cost + pot[u] - pot[v];
                    if (nd < dist[v] - 1e-15) {
                        dist[v] = nd;
                        prev_edge[v] = e;
                    }
                }
            }
            if (dist[t] >= inf) break;
            for (int v = 0; v < n_; ++v)
                if (dist[v] < inf) pot[v] += dist[v];
            double bottleneck = flow_target - pushed;
            for (int v = t; v != s; v = edges_[prev_edge[v] ^ 1].to)
                bottleneck = std::min(bottleneck, edges_[prev_edge[v]].cap);
            for (int v = t; v != s; v = edges_[prev_edge[v] ^ 1].to) {
                edges_[prev_edge[v]].cap -= bottleneck;
                edges_[prev_edge[v] ^ 1].cap += bottleneck;
                total_cost += bottleneck * edges_[prev_edge[v]].cost;
            }
            pushed += bottleneck;
        }
        return total_cost;
    }

private:
    struct edge {
        int to, next;
        double cap, cost;
    };
    int n_;
    std::vector<int> head_;
    std::vector<edge> edges_;
};

} // namespace

double w1_exact_discrete(const std::vector<double>& weight_a,
                         const std::vector<double>& weight_b,
                         const std::vector<std::vector<double>>& cost) {
    const std::size_t na = weight_a.size(), nb = weight_b.size();
    if (na == 0 || nb == 0) throw std::invalid_argument("w1_exact_discrete: empty support");
    if (na > 64 || nb > 64) throw std::invalid_argument("w1_exact_discrete: support over 64 points");
    if (cost.size() != na) throw std::invalid_argument("w1_exact_discrete: cost shape");
    double total_a = 0.0, total_b = 0.0;
    for (double w : weight_a) {
        if (w < 0.0) throw std::invalid_argument("w1_exact_discrete: negative weight");
        total_a += w;
    }
    for (double w : weight_b) {
        if (w < 0.0) throw std::invalid_argument("w1_exact_discrete: negative weight");
        total_b += w;
    }
    if (std::abs(total_a - total_b) > 1e-9)
        throw std::invalid_argument("w1_exact_discrete: weights must have equal mass");

    const int s = 0;
    const int t = static_cast<int>(na + nb) + 1;
    transport_solver solver(t + 1);
    for (std::size_t i = 0; i < na; ++i) solver.add_edge(s, 1 + static_cast<int>(i), weight_a[i], 0.0);
    for (std::size_t j = 0; j < nb; ++j)
        solver.add_edge(1 + static_cast<int>(na + j), t, weight_b[j], 0.0);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j) {
            if (cost[i][j] < 0.0)
                throw std::invalid_argument("w1_exact_discrete: negative cost");
            solver.add_edge(1 + static_cast<int>(i), 1 + static_cast<int>(na + j),
                            std::numeric_limits<double>::infinity(), cost[i][j]);
        }
    return solver.min_cost_flow(s, t, total_a);
}

double w1_exact_discrete(const std::vector<double>& points_a, const std::vector<double>& weight_a,
                         const std::vector<double>& points_b, const std::vector<double>& weight_b) {
    std::vector<std::vector<double>> cost(points_a.size(), std::vector<double>(points_b.size()));
    for (std::size_t i = 0; i < points_a.size(); ++i)
        for (std::size_t j = 0; j < points_b.size(); ++j)
            cost[i][j] = std::abs(points_a[i] - points_b[j]);
    return w1_exact_discrete(weight_a, weight_b, cost);
}

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                          double level) {
    if (trials == 0) throw std::invalid_argument("wilson_interval: trials must be >= 1");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("wilson_interval: level in (0,1) required");
    const double z = normal_quantile(0.5 + level / 2.0);
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p in (0,1) required");
    // Acklam's approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // one Halley refinement against erfc
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

} // namespace coupler
