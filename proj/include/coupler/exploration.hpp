#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coupler/graph.hpp"
#include "coupler/marks.hpp"

namespace coupler {

/// Rooted tree with Ulam-Harris addressing implicit in child order: node 0
/// is the root and the children vector of each node is ordered, so the label
/// of child r of node i is (label(i), r+1).
struct rooted_tree {
    struct node {
        std::uint32_t parent = 0;
        std::vector<std::uint32_t> children;
        std::uint32_t depth = 0;
        full_mark mark;
        std::int64_t vertex = -1; // originating vertex, -1 if none
    };
    std::vector<node> nodes; // BFS creation order

    std::size_t size() const { return nodes.size(); }
    std::string label(std::uint32_t idx) const; // dotted Ulam-Harris path, root = "-"
};

/// Depth-k neighborhood: layers of vertices plus the edges encountered while
/// scanning layers 0..k-1 (edges between two depth-k vertices are not part
/// of the neighborhood).
struct neighborhood {
    vertex_id root = 0;
    int depth = 0;
    std::vector<std::vector<vertex_id>> layers;
    std::vector<vertex_id> vertices; // discovery order; vertices[0] == root
    std::vector<full_mark> marks;    // aligned with vertices
    struct edge_rec {
        vertex_id u, v; // directed: u -> v
        std::uint32_t mult;
    };
    std::vector<edge_rec> edges; // no self-loops here
    std::vector<std::pair<vertex_id, std::uint32_t>> self_loops;

    std::size_t vertex_count() const { return vertices.size(); }
    bool is_tree() const;
};

/// Breadth-first closure of depth k around root, neighbors scanned in
/// ascending vertex id.
neighborhood explore_undirected(const multigraph& g, vertex_id root, int k);

/// Directed variant following inbound edges only; outbound degrees are still
/// recorded in the marks.
neighborhood explore_in_component(const multigraph& g, vertex_id root, int k);

enum class mark_scope { shape_only, attributes, full_marks };

/// Canonical byte string: equal codes iff rooted-isomorphic (and, when marks
/// are included, mark-preserving isomorphic). Children are sorted by their
/// recursive code. An optional quantization step maps numeric mark fields to
/// floor(x/eps) buckets before encoding.
std::string canonical_code(const rooted_tree& t, mark_scope scope,
                           std::optional<double> quantization = std::nullopt);

/// True iff the explored subgraph is a tree (no loops, no multi-edges, no
/// cross or back edges); returns it re-rooted with BFS child order.
std::optional<rooted_tree> neighborhood_as_tree(const neighborhood& nr);

/// Checks full-mark distances along an explicit node correspondence
/// (tree1 index -> tree2 index); throws if the correspondence is not a
/// bijection between the node sets.
bool marks_match_within(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& corr,
                        const rooted_tree& t1, const rooted_tree& t2, double eps);

/// Line format: one node per line, "label<TAB>mark fields".
void write_tree(std::ostream& os, const rooted_tree& t);

} // namespace coupler
