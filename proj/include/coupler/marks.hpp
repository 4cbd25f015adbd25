#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace coupler {

enum class model_kind { cm, ir, dcm, ird };

inline constexpr bool model_is_directed(model_kind m) {
    return m == model_kind::dcm || m == model_kind::ird;
}

std::string model_name(model_kind m);
model_kind model_from_name(const std::string& name);

/// Auxiliary mark: a fixed-dimension real vector, dimension constant within
/// one experiment (dimension 0 means no auxiliary mark).
using aux_mark = std::vector<double>;

/// Per-vertex attribute. primary1 holds the degree (cm), weight (ir) or the
/// inbound degree/weight (dcm/ird); primary2 holds the outbound one for the
/// directed models and is unused otherwise. Degree-valued entries are exact
/// integers stored as doubles.
struct attribute {
    model_kind model = model_kind::cm;
    double primary1 = 0.0;
    double primary2 = 0.0;
    aux_mark aux;
};

/// Full mark of a vertex or tree node: realized degree(s) prepended to the
/// attribute. Undirected: deg1 = degree. Directed: deg1 = in, deg2 = out.
struct full_mark {
    model_kind model = model_kind::cm;
    double deg1 = 0.0;
    double deg2 = 0.0;
    attribute attr;
};

/// L1 distance between auxiliary marks of equal dimension.
double aux_distance(const aux_mark& a, const aux_mark& b);

/// Distance on attributes: absolute gaps of the primary coordinate(s) plus
/// the auxiliary L1 distance. Both attributes must come from the same model.
double attribute_distance(const attribute& a, const attribute& b);

/// Distance on full marks: degree gap(s) plus attribute primary gap(s) plus
/// the auxiliary distance. Mixing directed with undirected marks is an error.
double full_mark_distance(const full_mark& x, const full_mark& y);

} // namespace coupler
