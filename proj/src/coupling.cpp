#include "coupler/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "coupler/stats.hpp"

namespace coupler {

std::string break_reason_name(break_reason r) {
    switch (r) {
    case break_reason::none: return "none";
    case break_reason::resample: return "resample";
    case break_reason::repeat_vertex: return "repeat-vertex";
    case break_reason::bernoulli_poisson_mismatch: return "bernoulli-poisson-mismatch";
    case break_reason::cycle_or_self_loop: return "cycle-or-self-loop";
    case break_reason::phantom_offspring: return "phantom-offspring";
    }
    return "?";
}

double coupling_outcome::max_attribute_distance() const {
    std::unordered_map<vertex_id, std::uint32_t> index_of;
    for (std::uint32_t i = 0; i < graph_side.vertices.size(); ++i)
        index_of.emplace(graph_side.vertices[i], i);
    double worst = 0.0;
    for (std::size_t ni = 0; ni < tree_side.size(); ++ni) {
        if (sigma[ni] < 0) continue;
        const auto it = index_of.find(static_cast<vertex_id>(sigma[ni]));
        if (it == index_of.end()) continue;
        worst = std::max(worst, attribute_distance(tree_side.nodes[ni].mark.attr,
                                                   graph_side.marks[it->second].attr));
    }
    return worst;
}

void alias_table::build(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    prob.assign(n, 1.0);
    alias.assign(n, 0);
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("alias_table: negative weight");
        total += w;
    }
    if (total <= 0.0) return; // degenerate; sample() must never be called
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] * static_cast<double>(n) / total;
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i)
        (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    while (!small.empty() && !large.empty()) {
        const auto s = small.back();
        small.pop_back();
        const auto l = large.back();
        prob[s] = scaled[s];
        alias[s] = l;
        scaled[l] -= 1.0 - scaled[s];
        if (scaled[l] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
    for (auto i : large) prob[i] = 1.0;
    for (auto i : small) prob[i] = 1.0;
}

vertex_id coupling_context::stub_owner(std::int64_t stub) const {
    const auto it = std::upper_bound(stub_offset.begin(), stub_offset.end(), stub);
    return static_cast<vertex_id>(it - stub_offset.begin() - 1);
}

double coupling_context::mean_offspring(vertex_id v) const {
    if (model == model_kind::ir)
        return wbar[v] * lambda / (kernel.theta * static_cast<double>(n));
    return wbar_in[v] * lambda_out / (kernel.theta * static_cast<double>(n));
}

double coupling_context::mean_out(vertex_id v) const {
    return wbar_out[v] * lambda_in / (kernel.theta * static_cast<double>(n));
}

coupling_context make_context(const attribute_sequence& attrs, kernel_config kernel) {
    coupling_context ctx;
    ctx.attrs = &attrs;
    ctx.model = attrs.model;
    ctx.n = attrs.size();
    ctx.kernel = std::move(kernel);
    if (ctx.n == 0) throw std::invalid_argument("make_context: empty attribute sequence");
    switch (ctx.model) {
    case model_kind::cm: {
        ctx.stub_offset.resize(ctx.n + 1, 0);
        for (std::size_t v = 0; v < ctx.n; ++v)
            ctx.stub_offset[v + 1] =
                ctx.stub_offset[v] + static_cast<std::int64_t>(attrs.attrs[v].primary1);
        ctx.stub_total = ctx.stub_offset[ctx.n];
        if (ctx.stub_total % 2 != 0)
            throw std::invalid_argument("make_context: odd stub count (repair the sequence first)");
        break;
    }
    case model_kind::dcm: {
        ctx.stub_offset.resize(ctx.n + 1, 0);
        ctx.in_stub_offset.resize(ctx.n + 1, 0);
        for (std::size_t v = 0; v < ctx.n; ++v) {
            ctx.stub_offset[v + 1] =
                ctx.stub_offset[v] + static_cast<std::int64_t>(attrs.attrs[v].primary2);
            ctx.in_stub_offset[v + 1] =
                ctx.in_stub_offset[v] + static_cast<std::int64_t>(attrs.attrs[v].primary1);
        }
        ctx.stub_total = ctx.stub_offset[ctx.n];
        ctx.in_stub_total = ctx.in_stub_offset[ctx.n];
        if (ctx.stub_total != ctx.in_stub_total)
            throw std::invalid_argument("make_context: unbalanced stub counts");
        break;
    }
    case model_kind::ir: {
        ctx.bn = ctx.kernel.truncation.bound(ctx.n);
        ctx.wbar.resize(ctx.n);
        for (std::size_t v = 0; v < ctx.n; ++v)
            ctx.wbar[v] = std::min(attrs.attrs[v].primary1, ctx.bn);
        for (double w : ctx.wbar) ctx.lambda += w;
        ctx.biased_pick.build(ctx.wbar);
        break;
    }
    case model_kind::ird: {
        ctx.bn = ctx.kernel.truncation.bound(ctx.n);
        ctx.an = ctx.bn;
        ctx.wbar_in.resize(ctx.n);
        ctx.wbar_out.resize(ctx.n);
        for (std::size_t v = 0; v < ctx.n; ++v) {
            ctx.wbar_in[v] = std::min(attrs.attrs[v].primary1, ctx.an);
            ctx.wbar_out[v] = std::min(attrs.attrs[v].primary2, ctx.bn);
        }
        for (double w : ctx.wbar_in) ctx.lambda_in += w;
        for (double w : ctx.wbar_out) ctx.lambda_out += w;
        ctx.biased_pick.build(ctx.wbar_out);
        break;
    }
    }
    return ctx;
}

namespace {

full_mark vertex_mark_from_attrs(const attribute_sequence& attrs, vertex_id v) {
    full_mark m;
    m.model = attrs.model;
    m.attr = attrs.attrs[v];
    if (attrs.model == model_kind::cm) m.deg1 = m.attr.primary1;
    if (attrs.model == model_kind::dcm) {
        m.deg1 = m.attr.primary1;
        m.deg2 = m.attr.primary2;
    }
    return m;
}

// Incremental neighborhood assembly shared by both engines.
struct nb_builder {
    vertex_id root = 0;
    int k = 0;
    std::vector<std::vector<vertex_id>> layers;
    std::vector<vertex_id> vertices;
    std::unordered_map<vertex_id, std::uint32_t> index_of;
    std::map<std::pair<vertex_id, vertex_id>, std::uint32_t> edge_mult;
    std::map<vertex_id, std::uint32_t> loop_count;

    void init(vertex_id r, int depth) {
        root = r;
        k = depth;
        layers.assign(static_cast<std::size_t>(depth) + 1, {});
        discover(r, 0);
    }
    bool has(vertex_id v) const { return index_of.count(v) != 0; }
    void discover(vertex_id v, int layer) {
        index_of.emplace(v, static_cast<std::uint32_t>(vertices.size()));
        vertices.push_back(v);
        layers[layer].push_back(v);
    }
    void add_edge_unit(vertex_id u, vertex_id v, bool directed) {
        if (u == v) {
            ++loop_count[u];
            return;
        }
        if (!directed && u > v) std::swap(u, v);
        ++edge_mult[{u, v}];
    }
    void add_edge_once(vertex_id u, vertex_id v, bool directed) {
        if (u == v) {
            loop_count[u] = 1;
            return;
        }
        if (!directed && u > v) std::swap(u, v);
        edge_mult[{u, v}] = 1;
    }
    neighborhood finish() const {
        neighborhood nr;
        nr.root = root;
        nr.depth = k;
        nr.layers = layers;
        nr.vertices = vertices;
        for (const auto& [pair, mult] : edge_mult)
            nr.edges.push_back({pair.first, pair.second, mult});
        for (const auto& [v, c] : loop_count) nr.self_loops.emplace_back(v, c);
        return nr;
    }
};

std::uint32_t add_tree_node(coupling_outcome& out, std::uint32_t parent, int depth,
                            full_mark mark, std::int64_t atom, node_latent latent) {
    auto& tree = out.tree_side;
    const auto idx = static_cast<std::uint32_t>(tree.nodes.size());
    rooted_tree::node nd;
    nd.parent = parent;
    nd.depth = static_cast<std::uint32_t>(depth);
    nd.mark = std::move(mark);
    nd.vertex = -1;
    tree.nodes.push_back(std::move(nd));
    if (idx != 0) tree.nodes[parent].children.push_back(idx);
    out.sigma.push_back(-1);
    latent.atom = atom;
    out.latents.push_back(latent);
    return idx;
}

void set_tau(coupling_outcome& out, int g, break_reason why) {
    if (out.tau >= 0) return;
    out.tau = g;
    out.reason = why;
}

// ---------------------------------------------------------------------------
// Stub pairing engine (cm / dcm). One instance per replication; the pairing
// state persists across roots so every exploration sees the same graph.
// ---------------------------------------------------------------------------

class stub_engine {
public:
    stub_engine(const coupling_context& ctx, rng_key rep_key)
        : ctx_(ctx),
          directed_(ctx.model == model_kind::dcm),
          stub_key_(derive_key(rep_key, stream_tag::stub)),
          partner_(static_cast<std::size_t>(ctx.stub_total), -1),
          in_partner_(directed_ ? static_cast<std::size_t>(ctx.in_stub_total) : 0, -1),
          touched_(ctx.n, 0),
          scanned_(ctx.n, 0) {}

    coupling_outcome run(vertex_id root, int k, rng_stream& aux) {
        coupling_outcome out;
        nb_builder nb;
        nb.init(root, k);
        logged_.clear();
        add_tree_node(out, 0, 0, vertex_mark_from_attrs(*ctx_.attrs, root), root, {});
        out.sigma[0] = root;
        out.tree_side.nodes[0].vertex = root;

        bool coupled = true;
        if (touched_[root] && k >= 1) {
            // the root already sits inside another exploration's territory
            set_tau(out, 1, break_reason::repeat_vertex);
            coupled = false;
        }
        touched_[root] = 1;

        std::size_t gen_begin = 0, gen_end = 1;
        for (int g = 1; g <= k; ++g) {
            for (std::size_t ni = gen_begin; ni < gen_end; ++ni) {
                if (coupled)
                    coupled = scan_coupled(out, nb, static_cast<std::uint32_t>(ni), g, aux);
                else
                    tree_children_aux(out, static_cast<std::uint32_t>(ni), g, aux);
            }
            for (std::size_t pos = 0; pos < nb.layers[g - 1].size(); ++pos) {
                const vertex_id v = nb.layers[g - 1][pos];
                if (!scanned_[v]) scan_graph_only(nb, v, g, aux);
            }
            gen_begin = gen_end;
            gen_end = out.tree_side.nodes.size();
        }
        out.graph_side = nb.finish();
        out.graph_side.marks.reserve(out.graph_side.vertices.size());
        for (vertex_id v : out.graph_side.vertices)
            out.graph_side.marks.push_back(vertex_mark_from_attrs(*ctx_.attrs, v));
        return out;
    }

private:
    long long slot_count(const coupling_outcome& out, std::uint32_t ni) const {
        const auto deg = static_cast<long long>(out.tree_side.nodes[ni].mark.deg1);
        if (directed_) return deg;
        return ni == 0 ? deg : deg - 1;
    }

    std::int64_t first_stub(vertex_id v) const {
        return directed_ ? ctx_.in_stub_offset[v] : ctx_.stub_offset[v];
    }
    std::int64_t end_stub(vertex_id v) const {
        return directed_ ? ctx_.in_stub_offset[v + 1] : ctx_.stub_offset[v + 1];
    }
    std::int64_t scan_partner(std::int64_t s) const {
        return directed_ ? in_partner_[s] : partner_[s];
    }

    std::int64_t candidate_from(double u) const {
        const auto L = ctx_.stub_total;
        const auto c = static_cast<std::int64_t>(u * static_cast<double>(L));
        return std::min(c, L - 1);
    }
    bool rejected(std::int64_t candidate, std::int64_t current) const {
        if (directed_) return partner_[candidate] >= 0;
        return candidate == current || partner_[candidate] >= 0;
    }
    void pair_stubs(std::int64_t current, std::int64_t candidate) {
        if (directed_) {
            in_partner_[current] = candidate;
            partner_[candidate] = current;
        } else {
            partner_[current] = candidate;
            partner_[candidate] = current;
        }
    }
    std::int64_t pair_id(std::int64_t current, std::int64_t candidate) const {
        return directed_ ? current : std::min(current, candidate);
    }

    void log_edge(nb_builder& nb, vertex_id v, vertex_id w, std::int64_t pid, int g) {
        if (!logged_.insert(pid).second) return;
        nb.add_edge_unit(directed_ ? w : v, directed_ ? v : w, directed_);
        if (!nb.has(w)) nb.discover(w, g);
    }

    std::uint32_t add_child(coupling_outcome& out, std::uint32_t parent, vertex_id j, int g) {
        return add_tree_node(out, parent, g, vertex_mark_from_attrs(*ctx_.attrs, j), j, {});
    }

    void tree_children_aux(coupling_outcome& out, std::uint32_t ni, int g, rng_stream& aux) {
        const long long slots = slot_count(out, ni);
        for (long long r = 0; r < slots; ++r) {
            const auto stub =
                static_cast<std::int64_t>(aux.next_below(static_cast<std::uint64_t>(ctx_.stub_total)));
            add_child(out, ni, ctx_.stub_owner(stub), g);
        }
    }

    // Joint processing of one tree node and its graph vertex. Returns false
    // once the coupling breaks; the remaining child slots of this node are
    // then already filled from the auxiliary stream, and the graph side is
    // left to the per-generation sweep.
    bool scan_coupled(coupling_outcome& out, nb_builder& nb, std::uint32_t ni, int g,
                      rng_stream& aux) {
        const auto v = static_cast<vertex_id>(out.sigma[ni]);
        const long long slots = slot_count(out, ni);
        long long slot = 0;
        for (std::int64_t s = first_stub(v); s < end_stub(v); ++s) {
            if (scan_partner(s) >= 0) {
                const std::int64_t c = scan_partner(s);
                log_edge(nb, v, ctx_.stub_owner(c), pair_id(s, c), g);
                continue;
            }
            const double u = indexed_uniform(stub_key_, event_counter_++);
            const std::int64_t first_pick = candidate_from(u);
            const std::uint32_t child = add_child(out, ni, ctx_.stub_owner(first_pick), g);
            ++slot;

            std::int64_t c = first_pick;
            bool resampled = false;
            while (rejected(c, s)) {
                resampled = true;
                c = candidate_from(aux.next_u01());
            }
            pair_stubs(s, c);
            const vertex_id w = ctx_.stub_owner(c);
            const bool seen_before = touched_[w] != 0;
            touched_[w] = 1;
            log_edge(nb, v, w, pair_id(s, c), g);
            if (!resampled && !seen_before) {
                out.sigma[child] = w;
                out.tree_side.nodes[child].vertex = w;
            } else {
                set_tau(out, g, resampled ? break_reason::resample : break_reason::repeat_vertex);
                for (long long r = slot; r < slots; ++r) {
                    const auto stub = static_cast<std::int64_t>(
                        aux.next_below(static_cast<std::uint64_t>(ctx_.stub_total)));
                    add_child(out, ni, ctx_.stub_owner(stub), g);
                }
                return false;
            }
        }
        scanned_[v] = 1;
        return true;
    }

    void scan_graph_only(nb_builder& nb, vertex_id v, int g, rng_stream& aux) {
        for (std::int64_t s = first_stub(v); s < end_stub(v); ++s) {
            if (scan_partner(s) >= 0) {
                const std::int64_t c = scan_partner(s);
                log_edge(nb, v, ctx_.stub_owner(c), pair_id(s, c), g);
                continue;
            }
            std::int64_t c = candidate_from(indexed_uniform(stub_key_, event_counter_++));
            while (rejected(c, s)) c = candidate_from(aux.next_u01());
            pair_stubs(s, c);
            const vertex_id w = ctx_.stub_owner(c);
            touched_[w] = 1;
            log_edge(nb, v, w, pair_id(s, c), g);
        }
        scanned_[v] = 1;
    }

    const coupling_context& ctx_;
    bool directed_;
    rng_key stub_key_;
    std::uint64_t event_counter_ = 0;
    std::vector<std::int64_t> partner_;    // cm: stub<->stub; dcm: out-stub -> in-stub
    std::vector<std::int64_t> in_partner_; // dcm: in-stub -> out-stub
    std::vector<std::uint8_t> touched_;
    std::vector<std::uint8_t> scanned_;
    std::unordered_set<std::int64_t> logged_; // edges already written to the current neighborhood
};

// ---------------------------------------------------------------------------
// Kernel engine (ir / ird). Edges are deterministic functions of per-pair
// uniforms, so the shared graph needs no state; the engine instead tracks
// which rows of the pair table the tree constructions have consumed.
// ---------------------------------------------------------------------------

class kernel_engine {
public:
    kernel_engine(const coupling_context& ctx, rng_key rep_key)
        : ctx_(ctx),
          directed_(ctx.model == model_kind::ird),
          pair_key_(derive_key(rep_key, stream_tag::pair)),
          touched_(ctx.n, 0),
          scanned_(ctx.n, 0),
          revealed_(ctx.n, 0),
          deg_acc_(ctx.n, 0),
          out_acc_(directed_ ? ctx.n : 0, 0) {}

    coupling_outcome run(vertex_id root, int k, rng_stream& aux) {
        coupling_outcome out;
        nb_builder nb;
        nb.init(root, k);
        node_latent lat;
        lat.lam_in = ctx_.mean_offspring(root);
        if (directed_) lat.lam_out = ctx_.mean_out(root);
        full_mark m;
        m.model = ctx_.model;
        m.attr = ctx_.attrs->attrs[root];
        add_tree_node(out, 0, 0, std::move(m), root, lat);
        out.sigma[0] = root;
        out.tree_side.nodes[0].vertex = root;

        bool coupled = true;
        if ((touched_[root] || revealed_[root]) && k >= 1) {
            set_tau(out, 1, break_reason::cycle_or_self_loop);
            coupled = false;
        }
        touched_[root] = 1;

        std::size_t gen_begin = 0, gen_end = 1;
        for (int g = 1; g <= k; ++g) {
            for (std::size_t ni = gen_begin; ni < gen_end; ++ni) {
                if (coupled) {
                    process_node_coupled(out, nb, static_cast<std::uint32_t>(ni), g, aux);
                    if (out.broke()) coupled = false;
                } else {
                    process_node_marginal(out, static_cast<std::uint32_t>(ni), g, aux);
                }
            }
            for (std::size_t pos = 0; pos < nb.layers[g - 1].size(); ++pos) {
                const vertex_id v = nb.layers[g - 1][pos];
                if (!scanned_[v]) scan_graph_only(nb, v, g);
            }
            gen_begin = gen_end;
            gen_end = out.tree_side.nodes.size();
        }
        builders_.push_back(std::move(nb));
        return out;
    }

    void complete(std::vector<coupling_outcome>& outcomes, std::vector<rng_stream>& aux_streams);

private:
    double edge_prob(vertex_id tail, vertex_id head) const {
        return directed_ ? edge_probability_ird(*ctx_.attrs, ctx_.kernel, tail, head)
                         : edge_probability_ir(*ctx_.attrs, ctx_.kernel, tail, head);
    }
    double q_toward(vertex_id j, vertex_id t) const {
        // mean count of type-j children of a type-t node
        return directed_ ? ctx_.q_arc(j, t) : ctx_.q_pair(t, j);
    }
    double pair_u_toward(vertex_id j, vertex_id t) const {
        return directed_ ? pair_uniform(pair_key_, j, t, true) : pair_uniform(pair_key_, t, j, false);
    }

    static long long pois_from_uniform(double u, double q) {
        if (q <= 0.0 || u <= 1.0 - q) return 0; // 1-q <= exp(-q)
        return poisson_inverse(u, q);
    }

    vertex_id sample_revealed_type(rng_stream& aux) const {
        // linear scan; the revealed set stays tiny compared to n
        double target = aux.next_u01() * sum_wbar_revealed_;
        for (vertex_id v : revealed_list_) {
            target -= ctx_.wbar[v];
            if (target <= 0.0) return v;
        }
        return revealed_list_.back();
    }

    void reveal(vertex_id v) {
        if (revealed_[v]) return;
        revealed_[v] = 1;
        revealed_list_.push_back(v);
        sum_wbar_revealed_ += directed_ ? ctx_.wbar_in[v] : ctx_.wbar[v];
    }

    void count_edge(vertex_id scanned_vertex, vertex_id j, bool first_scan) {
        if (!first_scan) return;
        if (directed_) {
            ++deg_acc_[scanned_vertex];
            ++out_acc_[j];
        } else if (!scanned_[j]) {
            ++deg_acc_[scanned_vertex];
            ++deg_acc_[j];
        }
    }

    void process_node_coupled(coupling_outcome& out, nb_builder& nb, std::uint32_t ni, int g,
                              rng_stream& aux) {
        const auto t = static_cast<vertex_id>(out.latents[ni].atom);
        const bool first_scan = !scanned_[t];
        struct child_draw {
            vertex_id type;
            std::int64_t sig;
        };
        std::vector<child_draw> kids;
        const auto n = static_cast<vertex_id>(ctx_.n);
        for (vertex_id j = 0; j < n; ++j) {
            const double u = pair_u_toward(j, t);
            const double p = (j == t) ? 0.0 : (directed_ ? edge_prob(j, t) : edge_prob(t, j));
            const bool x = u > 1.0 - p;
            const bool row_free = !revealed_[j];
            if (!x && (!row_free || u <= 1.0 - q_toward(j, t))) continue; // x = 0 and z = 0
            if (x) {
                nb.add_edge_once(directed_ ? j : t, directed_ ? t : j, directed_);
                if (!nb.has(j)) nb.discover(j, g);
                count_edge(t, j, first_scan);
                if (!row_free && out.tau < 0)
                    set_tau(out, g, break_reason::cycle_or_self_loop); // edge into consumed territory
                touched_[j] = 1;
            }
            if (!row_free) continue; // tree mass for consumed rows is aggregated below
            const long long z = pois_from_uniform(u, q_toward(j, t));
            if (out.tau < 0) {
                if (z != (x ? 1 : 0))
                    set_tau(out, g, break_reason::bernoulli_poisson_mismatch);
                else if (z >= 1 && touched_[j])
                    set_tau(out, g, break_reason::cycle_or_self_loop);
            }
            if (z >= 1) {
                const bool fresh = !touched_[j];
                touched_[j] = 1;
                const bool clean = out.tau < 0 && z == 1 && fresh;
                for (long long r = 0; r < z; ++r)
                    kids.push_back({j, clean ? static_cast<std::int64_t>(j) : -1});
            }
        }
        if (!directed_) {
            // independent mass for the types whose rows were already consumed
            const double lamJ = ctx_.wbar[t] / (ctx_.kernel.theta * static_cast<double>(ctx_.n)) *
                                sum_wbar_revealed_;
            const long long zstar = poisson_inverse(aux.next_u01(), lamJ);
            if (zstar >= 1) {
                if (out.tau < 0) set_tau(out, g, break_reason::phantom_offspring);
                for (long long r = 0; r < zstar; ++r)
                    kids.push_back({sample_revealed_type(aux), -1});
            }
        }
        aux.shuffle(kids.begin(), kids.end());
        out.tree_side.nodes[ni].mark.deg1 =
            static_cast<double>(kids.size()) + ((ni != 0 && !directed_) ? 1.0 : 0.0);
        for (const auto& kd : kids) {
            node_latent lat;
            lat.lam_in = ctx_.mean_offspring(kd.type);
            if (directed_) lat.lam_out = ctx_.mean_out(kd.type);
            full_mark m;
            m.model = ctx_.model;
            m.attr = ctx_.attrs->attrs[kd.type];
            const auto child = add_tree_node(out, ni, g, std::move(m), kd.type, lat);
            if (kd.sig >= 0) {
                out.sigma[child] = kd.sig;
                out.tree_side.nodes[child].vertex = kd.sig;
            }
        }
        scanned_[t] = 1;
        reveal(t);
    }

    void process_node_marginal(coupling_outcome& out, std::uint32_t ni, int g, rng_stream& aux) {
        const auto t = static_cast<vertex_id>(out.latents[ni].atom);
        const long long m = poisson_inverse(aux.next_u01(), ctx_.mean_offspring(t));
        out.tree_side.nodes[ni].mark.deg1 =
            static_cast<double>(m) + ((ni != 0 && !directed_) ? 1.0 : 0.0);
        for (long long r = 0; r < m; ++r) {
            const vertex_id type = ctx_.biased_pick.sample(aux);
            node_latent lat;
            lat.lam_in = ctx_.mean_offspring(type);
            if (directed_) lat.lam_out = ctx_.mean_out(type);
            full_mark mk;
            mk.model = ctx_.model;
            mk.attr = ctx_.attrs->attrs[type];
            add_tree_node(out, ni, g, std::move(mk), type, lat);
        }
    }

    void scan_graph_only(nb_builder& nb, vertex_id v, int g) {
        const bool first = !scanned_[v];
        const auto n = static_cast<vertex_id>(ctx_.n);
        for (vertex_id j = 0; j < n; ++j) {
            if (j == v) continue;
            const double u = pair_u_toward(j, v);
            const double p = directed_ ? edge_prob(j, v) : edge_prob(v, j);
            if (u > 1.0 - p) {
                nb.add_edge_once(directed_ ? j : v, directed_ ? v : j, directed_);
                if (!nb.has(j)) nb.discover(j, g);
                count_edge(v, j, first);
                touched_[j] = 1;
            }
        }
        scanned_[v] = 1;
        reveal(v);
    }

    const coupling_context& ctx_;
    bool directed_;
    rng_key pair_key_;
    std::vector<std::uint8_t> touched_;
    std::vector<std::uint8_t> scanned_;
    std::vector<std::uint8_t> revealed_;
    std::vector<std::uint32_t> deg_acc_; // undirected degree / ird in-degree
    std::vector<std::uint32_t> out_acc_; // ird realized out-edges
    std::vector<vertex_id> revealed_list_;
    double sum_wbar_revealed_ = 0.0;
    std::vector<nb_builder> builders_; // one per root, in root order
};

void kernel_engine::complete(std::vector<coupling_outcome>& outcomes,
                             std::vector<rng_stream>& aux_streams) {
    const auto n = static_cast<vertex_id>(ctx_.n);
    const std::vector<std::uint8_t> snapshot = scanned_; // rows consumed by structural scans
    std::unordered_map<vertex_id, std::uint32_t> extra_deg;
    std::unordered_map<vertex_id, std::uint32_t> extra_out;
    std::unordered_map<vertex_id, long long> out_count; // ird tree-side outbound counts

    // First coordinate: offspring counts of depth-k tree nodes plus the
    // not-yet-realized edges of boundary graph vertices.
    for (std::size_t rI = 0; rI < outcomes.size(); ++rI) {
        auto& out = outcomes[rI];
        auto& aux = aux_streams[rI];
        const int k = builders_[rI].k;
        for (std::size_t ni = 0; ni < out.tree_side.size(); ++ni) {
            auto& node = out.tree_side.nodes[ni];
            if (static_cast<int>(node.depth) != k) continue;
            const auto t = static_cast<vertex_id>(out.latents[ni].atom);
            long long count = 0;
            if (out.sigma[ni] >= 0 && !revealed_[t]) {
                std::uint32_t xsum = 0;
                for (vertex_id j = 0; j < n; ++j) {
                    const double u = pair_u_toward(j, t);
                    if (j != t && (directed_ || !snapshot[j])) {
                        const double p = directed_ ? edge_prob(j, t) : edge_prob(t, j);
                        if (u > 1.0 - p) {
                            ++xsum;
                            if (directed_) ++out_acc_[j];
                        }
                    }
                    if (!revealed_[j]) count += pois_from_uniform(u, q_toward(j, t));
                }
                if (!directed_) {
                    const double lamJ = ctx_.wbar[t] /
                                        (ctx_.kernel.theta * static_cast<double>(ctx_.n)) *
                                        sum_wbar_revealed_;
                    count += poisson_inverse(aux.next_u01(), lamJ);
                }
                extra_deg.emplace(t, xsum);
                reveal(t);
            } else {
                count = poisson_inverse(aux.next_u01(), out.latents[ni].lam_in);
            }
            node.mark.deg1 = static_cast<double>(count) + ((ni != 0 && !directed_) ? 1.0 : 0.0);
        }
        // boundary graph vertices without a coupled tree counterpart still
        // need honest first-coordinate degrees
        for (vertex_id v : builders_[rI].layers[k]) {
            if (snapshot[v] || extra_deg.count(v)) continue;
            std::uint32_t xsum = 0;
            for (vertex_id j = 0; j < n; ++j) {
                if (j == v) continue;
                if (!directed_ && snapshot[j]) continue;
                const double u = pair_u_toward(j, v);
                const double p = directed_ ? edge_prob(j, v) : edge_prob(v, j);
                if (u > 1.0 - p) {
                    ++xsum;
                    if (directed_) ++out_acc_[j];
                }
            }
            extra_deg.emplace(v, xsum);
            if (directed_) reveal(v); // the column is consumed either way
        }
    }

    // Second coordinate (ird): outbound marks against the frozen set of
    // consumed columns.
    if (directed_) {
        const double sum_in_excluded = sum_wbar_revealed_;
        auto complete_out = [&](vertex_id v, rng_stream& aux, bool with_tree) {
            if (with_tree ? out_count.count(v) != 0 : extra_out.count(v) != 0) return;
            std::uint32_t xsum = 0;
            long long zsum = 0;
            for (vertex_id j = 0; j < n; ++j) {
                if (revealed_[j]) continue;
                const double u = pair_uniform(pair_key_, v, j, true);
                if (j != v) {
                    const double p = edge_prob(v, j);
                    if (u > 1.0 - p) ++xsum;
                }
                if (with_tree) zsum += pois_from_uniform(u, ctx_.q_arc(v, j));
            }
            if (with_tree) {
                const double lam = ctx_.wbar_out[v] /
                                   (ctx_.kernel.theta * static_cast<double>(ctx_.n)) *
                                   sum_in_excluded;
                zsum += poisson_inverse(aux.next_u01(), lam);
                out_count.emplace(v, zsum);
            }
            extra_out.emplace(v, xsum);
        };
        // coupled tree nodes first (their counts also realize the x-sums)
        for (std::size_t rI = 0; rI < outcomes.size(); ++rI) {
            auto& out = outcomes[rI];
            for (std::size_t ni = 0; ni < out.tree_side.size(); ++ni) {
                if (out.sigma[ni] < 0) continue;
                complete_out(static_cast<vertex_id>(out.latents[ni].atom), aux_streams[rI], true);
            }
        }
        for (std::size_t rI = 0; rI < outcomes.size(); ++rI)
            for (vertex_id v : builders_[rI].vertices) complete_out(v, aux_streams[rI], false);
        // tree second coordinates
        for (std::size_t rI = 0; rI < outcomes.size(); ++rI) {
            auto& out = outcomes[rI];
            auto& aux = aux_streams[rI];
            for (std::size_t ni = 0; ni < out.tree_side.size(); ++ni) {
                auto& node = out.tree_side.nodes[ni];
                if (out.sigma[ni] >= 0) {
                    const auto t = static_cast<vertex_id>(out.latents[ni].atom);
                    node.mark.deg2 =
                        static_cast<double>(out_count[t]) + (ni != 0 ? 1.0 : 0.0);
                } else {
                    const long long extra =
                        poisson_inverse(aux.next_u01(), out.latents[ni].lam_out);
                    node.mark.deg2 = static_cast<double>(extra) + (ni != 0 ? 1.0 : 0.0);
                }
            }
        }
    }

    // Assemble the graph-side marks.
    for (std::size_t rI = 0; rI < outcomes.size(); ++rI) {
        auto& out = outcomes[rI];
        out.graph_side = builders_[rI].finish();
        out.graph_side.marks.reserve(out.graph_side.vertices.size());
        for (vertex_id v : out.graph_side.vertices) {
            full_mark m;
            m.model = ctx_.model;
            m.attr = ctx_.attrs->attrs[v];
            const auto it = extra_deg.find(v);
            m.deg1 = static_cast<double>(deg_acc_[v] + (it == extra_deg.end() ? 0 : it->second));
            if (directed_) {
                const auto ot = extra_out.find(v);
                m.deg2 =
                    static_cast<double>(out_acc_[v] + (ot == extra_out.end() ? 0 : ot->second));
            }
            out.graph_side.marks.push_back(std::move(m));
        }
    }
}

} // namespace

std::vector<coupling_outcome> couple_roots(const coupling_context& ctx,
                                           const std::vector<vertex_id>& roots, int k,
                                           rng_key replication_key) {
    if (k < 0) throw std::invalid_argument("couple_roots: negative depth");
    for (vertex_id r : roots)
        if (r >= ctx.n) throw std::out_of_range("couple_roots: root out of range");
    std::vector<coupling_outcome> outcomes;
    outcomes.reserve(roots.size());
    std::vector<rng_stream> aux_streams;
    aux_streams.reserve(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i)
        aux_streams.emplace_back(derive_key(replication_key, stream_tag::aux, i));

    if (ctx.model == model_kind::cm || ctx.model == model_kind::dcm) {
        stub_engine engine(ctx, replication_key);
        for (std::size_t i = 0; i < roots.size(); ++i)
            outcomes.push_back(engine.run(roots[i], k, aux_streams[i]));
    } else {
        kernel_engine engine(ctx, replication_key);
        for (std::size_t i = 0; i < roots.size(); ++i)
            outcomes.push_back(engine.run(roots[i], k, aux_streams[i]));
        engine.complete(outcomes, aux_streams);
    }
    return outcomes;
}

namespace {
coupling_outcome couple_one(const coupling_context& ctx, model_kind expect, vertex_id root, int k,
                            rng_key key) {
    if (ctx.model != expect) throw std::invalid_argument("coupling: context model mismatch");
    auto outcomes = couple_roots(ctx, {root}, k, key);
    return std::move(outcomes.front());
}
} // namespace

coupling_outcome couple_cm(const coupling_context& ctx, vertex_id root, int k, rng_key key) {
    return couple_one(ctx, model_kind::cm, root, k, key);
}
coupling_outcome couple_ir(const coupling_context& ctx, vertex_id root, int k, rng_key key) {
    return couple_one(ctx, model_kind::ir, root, k, key);
}
coupling_outcome couple_dcm(const coupling_context& ctx, vertex_id root, int k, rng_key key) {
    return couple_one(ctx, model_kind::dcm, root, k, key);
}
coupling_outcome couple_ird(const coupling_context& ctx, vertex_id root, int k, rng_key key) {
    return couple_one(ctx, model_kind::ird, root, k, key);
}

double bernoulli_poisson_mismatch_probability(double p, double q) {
    if (!(p >= 0.0 && p <= 1.0) || q < 0.0)
        throw std::invalid_argument("mismatch probability: bad parameters");
    const double e0 = std::exp(-q);             // P(Z = 0)
    const double e1 = std::exp(-q) * (1.0 + q); // P(Z <= 1)
    const double zero_one = std::abs(1.0 - p - e0);
    const double two_plus = std::min(p, 1.0 - e1);
    return zero_one + two_plus;
}

diagnostics_record edge_discrepancy_diagnostics(const coupling_context& ctx,
                                                const scalar_law& reference_weight_law,
                                                vertex_id i) {
    if (ctx.model != model_kind::ir && ctx.model != model_kind::ird)
        throw std::invalid_argument("edge_discrepancy_diagnostics: kernel models only");
    if (!std::isfinite(reference_weight_law.mean()))
        throw std::invalid_argument("edge_discrepancy_diagnostics: reference lacks first moment");
    const bool directed = ctx.model == model_kind::ird;
    const auto& attrs = *ctx.attrs;
    const auto n = static_cast<vertex_id>(ctx.n);
    const double theta = ctx.kernel.theta;

    auto p_of = [&](vertex_id tail, vertex_id head) {
        return directed ? edge_probability_ird(attrs, ctx.kernel, tail, head)
                        : edge_probability_ir(attrs, ctx.kernel, tail, head);
    };
    auto r_of = [&](vertex_id tail, vertex_id head) {
        const double wt = directed ? attrs.attrs[tail].primary2 : attrs.attrs[tail].primary1;
        const double wh = attrs.attrs[head].primary1;
        return wt * wh / (theta * static_cast<double>(n));
    };

    diagnostics_record rec;
    for (vertex_id j = 0; j < n; ++j) {
        if (j == i) continue;
        rec.p_discrepancy_i += std::abs(p_of(j, i) - std::min(r_of(j, i), 1.0));
    }
    if (ctx.kernel.phi) {
        for (vertex_id a = 0; a < n; ++a)
            for (vertex_id j = 0; j < n; ++j) {
                if (j == a) continue;
                rec.script_e_n += std::abs(p_of(j, a) - std::min(r_of(j, a), 1.0));
            }
        rec.script_e_n /= static_cast<double>(n);
    }

    std::vector<double> weights;
    weights.reserve(ctx.n);
    for (const auto& a : attrs.attrs) weights.push_back(directed ? a.primary2 : a.primary1);
    rec.delta_n = w1_quantile(weights, reference_weight_law);
    rec.g_bn = reference_weight_law.excess_mean(ctx.bn);
    const double bn2 = ctx.bn * ctx.bn;
    rec.eta_n = (rec.delta_n + rec.g_bn + bn2 / static_cast<double>(n) +
                 bn2 * rec.delta_n / (theta * static_cast<double>(n))) /
                theta;
    const double wi = attrs.attrs[i].primary1;
    const double wbar_i = directed ? ctx.wbar_in[i] : ctx.wbar[i];
    const double cap = directed ? ctx.an : ctx.bn;
    rec.bound = std::min(1.0, (wi > cap ? 1.0 : 0.0) + rec.p_discrepancy_i + wbar_i * rec.eta_n);
    return rec;
}

} // namespace coupler
