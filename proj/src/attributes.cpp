#include "coupler/attributes.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace coupler {

long long attribute_sequence::stub_count() const {
    long long total = 0;
    for (const auto& a : attrs)
        total += static_cast<long long>(model == model_kind::dcm ? a.primary2 : a.primary1);
    return total;
}

long long attribute_sequence::in_stub_count() const {
    long long total = 0;
    for (const auto& a : attrs) total += static_cast<long long>(a.primary1);
    return total;
}

double attribute_sequence::weight_sum() const {
    double total = 0.0;
    for (const auto& a : attrs) {
        total += a.primary1;
        if (model == model_kind::ird) total += a.primary2;
    }
    return total;
}

int attribute_sequence::aux_dimension() const {
    return attrs.empty() ? 0 : static_cast<int>(attrs.front().aux.size());
}

attribute attribute_model::sample(rng_stream& rng) const {
    attribute a;
    a.model = model;
    a.primary1 = primary1->sample(rng);
    if (model_is_directed(model)) a.primary2 = primary2->sample(rng);
    a.aux.resize(aux_dim);
    for (int i = 0; i < aux_dim; ++i) a.aux[i] = aux_law->sample(rng);
    return a;
}

attribute attribute_model::sample_biased(rng_stream& rng) const {
    attribute a;
    a.model = model;
    if (model_is_directed(model)) {
        a.primary1 = primary1->sample(rng);
        a.primary2 = primary2->sb_sample(rng);
    } else {
        a.primary1 = primary1->sb_sample(rng);
    }
    a.aux.resize(aux_dim);
    for (int i = 0; i < aux_dim; ++i) a.aux[i] = aux_law->sample(rng);
    return a;
}

double attribute_model::theta() const {
    switch (model) {
    case model_kind::ir: return primary1->mean();
    case model_kind::ird: return primary1->mean() + primary2->mean();
    default: return 1.0;
    }
}

double attribute_model::bias_mean() const {
    return model_is_directed(model) ? primary2->mean() : primary1->mean();
}

attribute_sequence generate_attributes(const attribute_model& law, std::size_t n, rng_key key) {
    attribute_sequence seq;
    seq.model = law.model;
    seq.theta = law.theta();
    seq.attrs.reserve(n);
    rng_stream rng(derive_key(key, stream_tag::attrs));
    for (std::size_t i = 0; i < n; ++i) seq.attrs.push_back(law.sample(rng));
    return seq;
}

attribute_sequence repair_attribute_sequence(attribute_sequence raw, rng_stream& rng) {
    if (raw.attrs.empty()) return raw;
    switch (raw.model) {
    case model_kind::cm: {
        if (raw.stub_count() % 2 != 0) raw.attrs.back().primary1 += 1.0;
        return raw;
    }
    case model_kind::dcm: {
        long long in = raw.in_stub_count();
        long long out = raw.stub_count();
        while (in != out) {
            const auto v = rng.next_below(raw.attrs.size());
            if (in < out) {
                raw.attrs[v].primary1 += 1.0;
                ++in;
            } else {
                raw.attrs[v].primary2 += 1.0;
                ++out;
            }
        }
        return raw;
    }
    default:
        return raw;
    }
}

void write_attributes_csv(std::ostream& os, const attribute_sequence& seq) {
    const int d = seq.aux_dimension();
    os << "vertex_id";
    switch (seq.model) {
    case model_kind::cm: os << ",d"; break;
    case model_kind::ir: os << ",w"; break;
    case model_kind::dcm: os << ",d_in,d_out"; break;
    case model_kind::ird: os << ",w_in,w_out"; break;
    }
    for (int i = 1; i <= d; ++i) os << ",b_" << i;
    os << "\n";
    char buf[64];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << ',' << buf;
    };
    for (std::size_t v = 0; v < seq.size(); ++v) {
        const auto& a = seq.attrs[v];
        os << (v + 1);
        put(a.primary1);
        if (model_is_directed(seq.model)) put(a.primary2);
        for (double b : a.aux) put(b);
        os << "\n";
    }
}

attribute_sequence read_attributes_csv(std::istream& is, model_kind model) {
    attribute_sequence seq;
    seq.model = model;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("attributes csv: missing header");
    const int primaries = model_is_directed(model) ? 2 : 1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                first = false;
                continue;
            }
            cells.push_back(std::stod(cell));
        }
        if (static_cast<int>(cells.size()) < primaries)
            throw std::invalid_argument("attributes csv: short row");
        attribute a;
        a.model = model;
        a.primary1 = cells[0];
        if (primaries == 2) a.primary2 = cells[1];
        a.aux.assign(cells.begin() + primaries, cells.end());
        seq.attrs.push_back(std::move(a));
    }
    double total = 0.0;
    for (const auto& a : seq.attrs) {
        total += a.primary1;
        if (model == model_kind::ird) total += a.primary2;
    }
    seq.theta = seq.attrs.empty() ? 1.0 : total / static_cast<double>(seq.size());
    return seq;
}

} // namespace coupler
