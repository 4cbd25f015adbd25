#include "coupler/exploration.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <ostream>
#include <stdexcept>

namespace coupler {

std::string rooted_tree::label(std::uint32_t idx) const {
    if (idx == 0) return "-";
    std::vector<std::uint32_t> ranks;
    std::uint32_t cur = idx;
    while (cur != 0) {
        const auto& siblings = nodes[nodes[cur].parent].children;
        const auto rank =
            std::find(siblings.begin(), siblings.end(), cur) - siblings.begin();
        ranks.push_back(static_cast<std::uint32_t>(rank) + 1);
        cur = nodes[cur].parent;
    }
    std::string out;
    for (auto it = ranks.rbegin(); it != ranks.rend(); ++it) {
        if (!out.empty()) out += '.';
        out += std::to_string(*it);
    }
    return out;
}

bool neighborhood::is_tree() const {
    if (!self_loops.empty()) return false;
    std::size_t edge_total = 0;
    for (const auto& e : edges) {
        if (e.mult != 1) return false;
        ++edge_total;
    }
    return edge_total + 1 == vertices.size();
}

namespace {

full_mark realized_mark(const multigraph& g, vertex_id v) {
    full_mark m;
    m.model = g.attrs.model;
    m.attr = g.attrs.attrs[v];
    if (g.directed) {
        m.deg1 = static_cast<double>(g.realized_in_degree(v));
        m.deg2 = static_cast<double>(g.realized_out_degree(v));
    } else {
        m.deg1 = static_cast<double>(g.realized_degree(v));
    }
    return m;
}

neighborhood explore(const multigraph& g, vertex_id root, int k, bool inbound) {
    if (root >= g.n) throw std::out_of_range("explore: root out of range");
    if (k < 0) throw std::invalid_argument("explore: negative depth");
    neighborhood nr;
    nr.root = root;
    nr.depth = k;
    std::vector<int> layer_of(g.n, -1);
    layer_of[root] = 0;
    nr.layers.push_back({root});
    nr.vertices.push_back(root);
    nr.marks.push_back(realized_mark(g, root));
    std::map<std::pair<vertex_id, vertex_id>, std::uint32_t> edge_mult;

    for (int r = 0; r < k && !nr.layers[r].empty(); ++r) {
        std::vector<vertex_id> next;
        for (vertex_id u : nr.layers[r]) {
            if (g.loops[u] > 0) nr.self_loops.emplace_back(u, g.loops[u]);
            const auto& list = inbound ? g.in_adj[u] : g.adj[u];
            for (const auto& [w, mult] : list) {
                if (layer_of[w] == -1) {
                    layer_of[w] = r + 1;
                    next.push_back(w);
                    nr.vertices.push_back(w);
                    nr.marks.push_back(realized_mark(g, w));
                }
                // keyed assignment dedupes the two scans of an undirected edge
                const vertex_id a = inbound ? w : std::min(u, w);
                const vertex_id b = inbound ? u : std::max(u, w);
                edge_mult[{a, b}] = mult;
            }
        }
        nr.layers.push_back(std::move(next));
    }
    while (static_cast<int>(nr.layers.size()) <= k) nr.layers.emplace_back();
    for (const auto& [pair, mult] : edge_mult)
        nr.edges.push_back({pair.first, pair.second, mult});
    return nr;
}

} // namespace

neighborhood explore_undirected(const multigraph& g, vertex_id root, int k) {
    if (g.directed) throw std::invalid_argument("explore_undirected: directed graph");
    return explore(g, root, k, false);
}

neighborhood explore_in_component(const multigraph& g, vertex_id root, int k) {
    if (!g.directed) throw std::invalid_argument("explore_in_component: undirected graph");
    return explore(g, root, k, true);
}

namespace {

void encode_double(std::string& out, double x, const std::optional<double>& quant) {
    if (x == 0.0) x = 0.0; // normalize -0
    if (quant) {
        const long long bucket = static_cast<long long>(std::floor(x / *quant));
        out.append(reinterpret_cast<const char*>(&bucket), sizeof bucket);
    } else {
        out.append(reinterpret_cast<const char*>(&x), sizeof x);
    }
}

void encode_mark(std::string& out, const full_mark& m, mark_scope scope,
                 const std::optional<double>& quant) {
    if (scope == mark_scope::full_marks) {
        encode_double(out, m.deg1, quant);
        if (model_is_directed(m.model)) encode_double(out, m.deg2, quant);
    }
    encode_double(out, m.attr.primary1, quant);
    if (model_is_directed(m.model)) encode_double(out, m.attr.primary2, quant);
    for (double b : m.attr.aux) encode_double(out, b, quant);
}

std::string code_rec(const rooted_tree& t, std::uint32_t v, mark_scope scope,
                     const std::optional<double>& quant) {
    std::vector<std::string> child_codes;
    child_codes.reserve(t.nodes[v].children.size());
    for (auto c : t.nodes[v].children) child_codes.push_back(code_rec(t, c, scope, quant));
    std::sort(child_codes.begin(), child_codes.end());
    std::string s = "(";
    if (scope != mark_scope::shape_only) encode_mark(s, t.nodes[v].mark, scope, quant);
    for (const auto& c : child_codes) s += c;
    s += ')';
    return s;
}

} // namespace

std::string canonical_code(const rooted_tree& t, mark_scope scope,
                           std::optional<double> quantization) {
    if (t.nodes.empty()) return "";
    return code_rec(t, 0, scope, quantization);
}

std::optional<rooted_tree> neighborhood_as_tree(const neighborhood& nr) {
    if (!nr.is_tree()) return std::nullopt;
    rooted_tree t;
    t.nodes.resize(nr.vertex_count());
    std::map<vertex_id, std::uint32_t> index_of;
    for (std::uint32_t i = 0; i < nr.vertex_count(); ++i) {
        index_of[nr.vertices[i]] = i;
        t.nodes[i].mark = nr.marks[i];
        t.nodes[i].vertex = nr.vertices[i];
    }
    // edges are (child-side, parent-side) for inbound exploration and
    // arbitrary orientation for undirected; attach by BFS layer
    std::vector<int> layer_of(nr.vertex_count(), -1);
    for (std::size_t r = 0; r < nr.layers.size(); ++r)
        for (vertex_id v : nr.layers[r]) layer_of[index_of[v]] = static_cast<int>(r);
    for (const auto& e : nr.edges) {
        std::uint32_t a = index_of.at(e.u), b = index_of.at(e.v);
        if (layer_of[a] == layer_of[b]) return std::nullopt; // cross edge
        std::uint32_t child = layer_of[a] > layer_of[b] ? a : b;
        std::uint32_t parent = layer_of[a] > layer_of[b] ? b : a;
        t.nodes[child].parent = parent;
        t.nodes[child].depth = static_cast<std::uint32_t>(layer_of[child]);
    }
    for (std::uint32_t i = 1; i < t.nodes.size(); ++i)
        t.nodes[t.nodes[i].parent].children.push_back(i);
    return t;
}

bool marks_match_within(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& corr,
                        const rooted_tree& t1, const rooted_tree& t2, double eps) {
    if (corr.size() != t1.size() || corr.size() != t2.size())
        throw std::invalid_argument("marks_match_within: correspondence is not a bijection");
    std::vector<bool> seen1(t1.size(), false), seen2(t2.size(), false);
    for (const auto& [a, b] : corr) {
        if (a >= t1.size() || b >= t2.size() || seen1[a] || seen2[b])
            throw std::invalid_argument("marks_match_within: correspondence is not a bijection");
        seen1[a] = seen2[b] = true;
    }
    for (const auto& [a, b] : corr)
        if (full_mark_distance(t1.nodes[a].mark, t2.nodes[b].mark) > eps) return false;
    return true;
}

void write_tree(std::ostream& os, const rooted_tree& t) {
    char buf[64];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << '\t' << buf;
    };
    for (std::uint32_t i = 0; i < t.size(); ++i) {
        const auto& m = t.nodes[i].mark;
        os << t.label(i);
        put(m.deg1);
        if (model_is_directed(m.model)) put(m.deg2);
        put(m.attr.primary1);
        if (model_is_directed(m.model)) put(m.attr.primary2);
        for (double b : m.attr.aux) put(b);
        os << '\n';
    }
}

} // namespace coupler
