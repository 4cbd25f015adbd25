#include "coupler/marks.hpp"

#include <cmath>
#include <stdexcept>

namespace coupler {

std::string model_name(model_kind m) {
    switch (m) {
    case model_kind::cm: return "cm";
    case model_kind::ir: return "ir";
    case model_kind::dcm: return "dcm";
    case model_kind::ird: return "ird";
    }
    return "?";
}

model_kind model_from_name(const std::string& name) {
    if (name == "cm") return model_kind::cm;
    if (name == "ir") return model_kind::ir;
    if (name == "dcm") return model_kind::dcm;
    if (name == "ird") return model_kind::ird;
    throw std::invalid_argument("unknown model: " + name);
}

double aux_distance(const aux_mark& a, const aux_mark& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("aux_distance: dimension mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

double attribute_distance(const attribute& a, const attribute& b) {
    if (a.model != b.model)
        throw std::invalid_argument("attribute_distance: kind mismatch");
    double d = std::abs(a.primary1 - b.primary1);
    if (model_is_directed(a.model)) d += std::abs(a.primary2 - b.primary2);
    return d + aux_distance(a.aux, b.aux);
}

double full_mark_distance(const full_mark& x, const full_mark& y) {
    if (model_is_directed(x.model) != model_is_directed(y.model))
        throw std::invalid_argument("full_mark_distance: mixed directedness");
    if (x.model != y.model)
        throw std::invalid_argument("full_mark_distance: kind mismatch");
    double d = std::abs(x.deg1 - y.deg1);
    if (model_is_directed(x.model)) d += std::abs(x.deg2 - y.deg2);
    d += std::abs(x.attr.primary1 - y.attr.primary1);
    if (model_is_directed(x.model)) d += std::abs(x.attr.primary2 - y.attr.primary2);
    return d + aux_distance(x.attr.aux, y.attr.aux);
}

} // namespace coupler
