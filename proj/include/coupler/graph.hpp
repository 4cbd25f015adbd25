#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "coupler/attributes.hpp"
#include "coupler/marks.hpp"
#include "coupler/rng.hpp"

namespace coupler {

using vertex_id = std::uint32_t;

/// Multigraph with explicit self-loop and multiplicity accounting. Undirected
/// graphs store every edge in both endpoint lists; self-loops live only in
/// loops[]. Directed graphs keep both out- and in-adjacency.
struct multigraph {
    std::uint32_t n = 0;
    bool directed = false;
    std::vector<std::vector<std::pair<vertex_id, std::uint32_t>>> adj;    // undirected, or out
    std::vector<std::vector<std::pair<vertex_id, std::uint32_t>>> in_adj; // directed only
    std::vector<std::uint32_t> loops;                                     // l(i)
    attribute_sequence attrs;

    /// Realized degree: 2 l(i) + sum of multiplicities.
    std::uint64_t realized_degree(vertex_id v) const;
    std::uint64_t realized_in_degree(vertex_id v) const;
    std::uint64_t realized_out_degree(vertex_id v) const;
    std::uint32_t multiplicity(vertex_id u, vertex_id v) const;
};

/// Perturbation hook for the rank-1 kernel; arguments are (n, w_i, w_j)
/// where the w's are the connectivity weights of the two endpoints (out-
/// weight of the tail and in-weight of the head for digraphs).
using phi_fn = std::function<double(std::size_t, double, double)>;

struct truncation_schedule {
    double exponent = 0.25; // b_n = n^exponent; must stay in (0, 1/2)
    double bound(std::size_t n) const;
};

struct kernel_config {
    double theta = 1.0;
    phi_fn phi;                    // null means 0
    truncation_schedule truncation;
};

/// Edge probability of the rank-1 kernel; returns 0 on the diagonal.
double edge_probability_ir(const attribute_sequence& attrs, const kernel_config& kernel,
                           vertex_id i, vertex_id j);
double edge_probability_ird(const attribute_sequence& attrs, const kernel_config& kernel,
                            vertex_id i, vertex_id j);

/// Uniform pairing of stubs; requires an even stub count.
multigraph sample_cm(const attribute_sequence& attrs, rng_key key);
/// Uniform pairing of inbound against outbound stubs; requires balance.
multigraph sample_dcm(const attribute_sequence& attrs, rng_key key);

/// Bernoulli edges realized from the shared per-pair uniforms, so a sampled
/// graph and a coupled exploration with the same key see identical edges.
multigraph sample_ir(const attribute_sequence& attrs, const kernel_config& kernel, rng_key key);
multigraph sample_ird(const attribute_sequence& attrs, const kernel_config& kernel, rng_key key);

} // namespace coupler
