#pragma once

#include <iosfwd>
#include <vector>

#include "coupler/marks.hpp"
#include "coupler/reference_laws.hpp"
#include "coupler/rng.hpp"

namespace coupler {

/// One experiment's vertex attributes plus the aggregates every sampler
/// needs. theta is the edge-density normalizer for ir/ird (ignored by the
/// pairing models).
struct attribute_sequence {
    model_kind model = model_kind::cm;
    std::vector<attribute> attrs;
    double theta = 1.0;

    std::size_t size() const { return attrs.size(); }

    /// Sum of degrees (cm) or of out-degrees (dcm). Integer-exact.
    long long stub_count() const;
    /// Sum of in-degrees (dcm only).
    long long in_stub_count() const;
    double weight_sum() const;     // ir: sum W; ird: sum (W- + W+)
    int aux_dimension() const;
};

/// The joint law generating one attribute: per-coordinate reference laws,
/// coordinates independent. For cm/ir only primary1 is used; dcm/ird use
/// both. aux coordinates are i.i.d. from aux_law.
struct attribute_model {
    model_kind model = model_kind::cm;
    std::shared_ptr<scalar_law> primary1;
    std::shared_ptr<scalar_law> primary2; // directed models only
    std::shared_ptr<scalar_law> aux_law;  // may be null
    int aux_dim = 0;

    attribute sample(rng_stream& rng) const;
    attribute sample_biased(rng_stream& rng) const; // size-biased by the bias coordinate
    /// Bias coordinate: degree/weight for undirected, outbound one for
    /// directed.
    double theta() const;     // mean W (ir) or mean W- + W+ (ird)
    double bias_mean() const; // E of the biasing coordinate
};

/// Draw n i.i.d. attributes and fix theta to the model-true value.
attribute_sequence generate_attributes(const attribute_model& law, std::size_t n, rng_key key);

/// Make a raw sequence graphical: cm with odd degree sum gets one extra stub
/// at the last vertex; dcm sequences get uniformly placed stubs on the
/// deficient side until in- and out-sums agree. ir/ird pass through.
attribute_sequence repair_attribute_sequence(attribute_sequence raw, rng_stream& rng);

void write_attributes_csv(std::ostream& os, const attribute_sequence& seq);
attribute_sequence read_attributes_csv(std::istream& is, model_kind model);

} // namespace coupler
