#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coupler/attributes.hpp"
#include "coupler/exploration.hpp"
#include "coupler/graph.hpp"
#include "coupler/marks.hpp"
#include "coupler/rng.hpp"

namespace coupler {

enum class break_reason {
    none,
    resample,                   // stub models: first pick hit an unavailable stub
    repeat_vertex,              // stub models: paired into an already-seen vertex
    bernoulli_poisson_mismatch, // kernel models: edge indicator != offspring count
    cycle_or_self_loop,         // kernel models: offspring of an already-seen vertex
    phantom_offspring,          // kernel models: positive count for an exhausted type
};

std::string break_reason_name(break_reason r);

/// Per-node latents kept for attaching the limit tree later: the atom the
/// node's attribute came from and, for the kernel models, the Poisson means
/// behind the realized counts (-1 marks counts that are attribute degrees).
struct node_latent {
    std::int64_t atom = -1;
    double lam_in = -1.0;
    double lam_out = -1.0;
};

struct coupling_outcome {
    neighborhood graph_side;
    rooted_tree tree_side;             // intermediate tree cut at depth k
    std::vector<std::int64_t> sigma;   // tree node -> vertex id, -1 once the coupling broke
    std::vector<node_latent> latents;  // aligned with tree_side.nodes
    int tau = -1;                      // break generation in 1..k, -1 = none
    break_reason reason = break_reason::none;

    bool broke() const { return tau >= 0; }
    double max_attribute_distance() const; // over sigma-paired nodes
};

/// Sampling weights with O(1) draws (Vose alias method); deterministic given
/// the stream.
struct alias_table {
    std::vector<double> prob;
    std::vector<std::uint32_t> alias;

    void build(const std::vector<double>& weights);
    std::uint32_t sample(rng_stream& rng) const {
        const auto i = static_cast<std::uint32_t>(rng.next_below(prob.size()));
        return rng.next_u01() < prob[i] ? i : alias[i];
    }
};

/// Immutable per-sequence state shared by all replications at one n: stub
/// layout for the pairing models, truncated weights and totals for the
/// kernel models.
struct coupling_context {
    const attribute_sequence* attrs = nullptr;
    model_kind model = model_kind::cm;
    std::size_t n = 0;
    kernel_config kernel;

    // cm/dcm
    std::vector<std::int64_t> stub_offset; // vertex v owns stubs [offset[v], offset[v+1])
    std::int64_t stub_total = 0;           // L_n
    std::vector<std::int64_t> in_stub_offset; // dcm: inbound stubs per vertex
    std::int64_t in_stub_total = 0;

    // ir/ird
    double bn = 0.0, an = 0.0;
    std::vector<double> wbar;     // undirected truncated weights
    std::vector<double> wbar_in;  // directed: min(W-, a_n)
    std::vector<double> wbar_out; // directed: min(W+, b_n)
    double lambda = 0.0;          // sum of wbar
    double lambda_in = 0.0, lambda_out = 0.0;
    alias_table biased_pick;      // over wbar (undirected) or wbar_out (directed)

    vertex_id stub_owner(std::int64_t stub) const;
    double mean_offspring(vertex_id v) const; // Poisson mean of the offspring count
    double mean_out(vertex_id v) const;       // ird: Poisson mean of the extra out-edges
    double q_pair(vertex_id i, vertex_id j) const {
        return wbar[i] * wbar[j] / (kernel.theta * static_cast<double>(n));
    }
    double q_arc(vertex_id tail, vertex_id head) const {
        return wbar_out[tail] * wbar_in[head] / (kernel.theta * static_cast<double>(n));
    }
};

coupling_context make_context(const attribute_sequence& attrs, kernel_config kernel = {});

/// Runs the joint graph/tree constructions from several distinct roots on a
/// single shared graph realization. Outcomes appear in root order; the whole
/// call is a deterministic function of (context, roots, k, key).
std::vector<coupling_outcome> couple_roots(const coupling_context& ctx,
                                           const std::vector<vertex_id>& roots, int k,
                                           rng_key replication_key);

coupling_outcome couple_cm(const coupling_context& ctx, vertex_id root, int k, rng_key key);
coupling_outcome couple_ir(const coupling_context& ctx, vertex_id root, int k, rng_key key);
coupling_outcome couple_dcm(const coupling_context& ctx, vertex_id root, int k, rng_key key);
coupling_outcome couple_ird(const coupling_context& ctx, vertex_id root, int k, rng_key key);

/// Exact P(X != Z) for X = 1(U > 1-p) and Z the Poisson(q) pseudoinverse of
/// the same uniform.
double bernoulli_poisson_mismatch_probability(double p, double q);

struct diagnostics_record {
    double p_discrepancy_i = 0.0; // sum_j |p_ji - min(r_ji, 1)|
    double script_e_n = 0.0;      // (1/n) sum_i of the above
    double delta_n = 0.0;         // quantile distance of weights to the reference law
    double eta_n = 0.0;
    double g_bn = 0.0;            // E[(W - b_n)^+] under the reference
    double bound = 0.0;           // min{1, 1(W_i > b_n) + P_n(i) + Wbar_i eta_n}
};

diagnostics_record edge_discrepancy_diagnostics(const coupling_context& ctx,
                                                const scalar_law& reference_weight_law,
                                                vertex_id i);

} // namespace coupler
