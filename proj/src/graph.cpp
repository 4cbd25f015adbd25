#include "coupler/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace coupler {

std::uint64_t multigraph::realized_degree(vertex_id v) const {
    std::uint64_t d = 2ull * loops[v];
    for (const auto& [w, mult] : adj[v]) {
        (void)w;
        d += mult;
    }
    return d;
}

std::uint64_t multigraph::realized_out_degree(vertex_id v) const {
    std::uint64_t d = loops[v];
    for (const auto& [w, mult] : adj[v]) {
        (void)w;
        d += mult;
    }
    return d;
}

std::uint64_t multigraph::realized_in_degree(vertex_id v) const {
    std::uint64_t d = loops[v];
    for (const auto& [w, mult] : in_adj[v]) {
        (void)w;
        d += mult;
    }
    return d;
}

std::uint32_t multigraph::multiplicity(vertex_id u, vertex_id v) const {
    if (u == v) return loops[u];
    for (const auto& [w, mult] : adj[u])
        if (w == v) return mult;
    return 0;
}

double truncation_schedule::bound(std::size_t n) const {
    if (!(exponent > 0.0 && exponent < 0.5))
        throw std::invalid_argument("truncation exponent must lie in (0, 1/2)");
    return std::pow(static_cast<double>(n), exponent);
}

namespace {

double capped_probability(double wi, double wj, double theta, std::size_t n, const phi_fn& phi) {
    const double factor = phi ? 1.0 + phi(n, wi, wj) : 1.0;
    if (factor <= 0.0) throw std::invalid_argument("phi must stay above -1");
    return std::min(1.0, wi * wj * factor / (theta * static_cast<double>(n)));
}

struct edge_accumulator {
    std::map<std::pair<vertex_id, vertex_id>, std::uint32_t> mult;
    std::vector<std::uint32_t> loops;

    explicit edge_accumulator(std::uint32_t n) : loops(n, 0) {}

    void add(vertex_id u, vertex_id v, bool directed) {
        if (u == v) {
            ++loops[u];
            return;
        }
        if (!directed && u > v) std::swap(u, v);
        ++mult[{u, v}];
    }
};

multigraph finish(edge_accumulator&& acc, const attribute_sequence& attrs, bool directed) {
    multigraph g;
    g.n = static_cast<std::uint32_t>(attrs.size());
    g.directed = directed;
    g.attrs = attrs;
    g.loops = std::move(acc.loops);
    g.adj.resize(g.n);
    if (directed) g.in_adj.resize(g.n);
    for (const auto& [pair, m] : acc.mult) {
        g.adj[pair.first].emplace_back(pair.second, m);
        if (directed)
            g.in_adj[pair.second].emplace_back(pair.first, m);
        else
            g.adj[pair.second].emplace_back(pair.first, m);
    }
    for (auto& list : g.adj) std::sort(list.begin(), list.end());
    for (auto& list : g.in_adj) std::sort(list.begin(), list.end());
    return g;
}

} // namespace

double edge_probability_ir(const attribute_sequence& attrs, const kernel_config& kernel,
                           vertex_id i, vertex_id j) {
    if (i == j) return 0.0;
    return capped_probability(attrs.attrs[i].primary1, attrs.attrs[j].primary1, kernel.theta,
                              attrs.size(), kernel.phi);
}

double edge_probability_ird(const attribute_sequence& attrs, const kernel_config& kernel,
                            vertex_id i, vertex_id j) {
    if (i == j) return 0.0;
    return capped_probability(attrs.attrs[i].primary2, attrs.attrs[j].primary1, kernel.theta,
                              attrs.size(), kernel.phi);
}

multigraph sample_cm(const attribute_sequence& attrs, rng_key key) {
    const long long stubs_total = attrs.stub_count();
    if (stubs_total % 2 != 0) throw std::invalid_argument("sample_cm: odd stub count");
    std::vector<vertex_id> stubs;
    stubs.reserve(stubs_total);
    for (vertex_id v = 0; v < attrs.size(); ++v) {
        const auto d = static_cast<long long>(attrs.attrs[v].primary1);
        for (long long s = 0; s < d; ++s) stubs.push_back(v);
    }
    rng_stream rng(derive_key(key, stream_tag::stub));
    rng.shuffle(stubs.begin(), stubs.end());
    edge_accumulator acc(static_cast<std::uint32_t>(attrs.size()));
    for (std::size_t t = 0; t + 1 < stubs.size(); t += 2) acc.add(stubs[t], stubs[t + 1], false);
    return finish(std::move(acc), attrs, false);
}

multigraph sample_dcm(const attribute_sequence& attrs, rng_key key) {
    if (attrs.in_stub_count() != attrs.stub_count())
        throw std::invalid_argument("sample_dcm: unbalanced stub counts");
    std::vector<vertex_id> out_stubs, in_stubs;
    for (vertex_id v = 0; v < attrs.size(); ++v) {
        const auto din = static_cast<long long>(attrs.attrs[v].primary1);
        const auto dout = static_cast<long long>(attrs.attrs[v].primary2);
        for (long long s = 0; s < din; ++s) in_stubs.push_back(v);
        for (long long s = 0; s < dout; ++s) out_stubs.push_back(v);
    }
    rng_stream rng(derive_key(key, stream_tag::stub));
    rng.shuffle(out_stubs.begin(), out_stubs.end());
    edge_accumulator acc(static_cast<std::uint32_t>(attrs.size()));
    for (std::size_t t = 0; t < in_stubs.size(); ++t) acc.add(out_stubs[t], in_stubs[t], true);
    return finish(std::move(acc), attrs, true);
}

multigraph sample_ir(const attribute_sequence& attrs, const kernel_config& kernel, rng_key key) {
    const rng_key pair_key = derive_key(key, stream_tag::pair);
    edge_accumulator acc(static_cast<std::uint32_t>(attrs.size()));
    for (vertex_id i = 0; i < attrs.size(); ++i)
        for (vertex_id j = i + 1; j < attrs.size(); ++j) {
            const double p = edge_probability_ir(attrs, kernel, i, j);
            if (p > 0.0 && pair_uniform(pair_key, i, j, false) > 1.0 - p) acc.add(i, j, false);
        }
    return finish(std::move(acc), attrs, false);
}

multigraph sample_ird(const attribute_sequence& attrs, const kernel_config& kernel, rng_key key) {
    const rng_key pair_key = derive_key(key, stream_tag::pair);
    edge_accumulator acc(static_cast<std::uint32_t>(attrs.size()));
    for (vertex_id i = 0; i < attrs.size(); ++i)
        for (vertex_id j = 0; j < attrs.size(); ++j) {
            if (i == j) continue;
            const double p = edge_probability_ird(attrs, kernel, i, j);
            if (p > 0.0 && pair_uniform(pair_key, i, j, true) > 1.0 - p) acc.add(i, j, true);
        }
    return finish(std::move(acc), attrs, true);
}

} // namespace coupler
