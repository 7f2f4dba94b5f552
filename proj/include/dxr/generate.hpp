#pragma once
// Synthetic knowledge bases and random findings.

#include <cstddef>
#include <cstdint>

#include "dxr/kb.hpp"

namespace dxr {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct GeneratorSpec {
    std::size_t n_diseases = 10;
    std::size_t n_manifestations = 14;
    std::size_t n_treatments = 4;
    std::size_t links_per_manifestation = 2;
    Range prior{0.01, 0.2};
    Range strength{0.2, 0.95};
    Range leak{0.0, 0.05};

    // Probability that a treatment treats two diseases instead of one.
    double two_disease_prob = 0.3;
    // Per unordered treatment pair: a treatment-treatment interaction node.
    double interaction_prob = 0.15;
    // Per treatment: a harm node coupling it with a disease it does not treat.
    double harm_prob = 0.1;
    // Each disease treated by at most one treatment, each treatment treats
    // one disease, no interaction or harm nodes.
    bool exclusive_treatments = false;

    // Treating-pair utilities: U(0,1) = side effect s, U(1,0) = untreated u,
    // U(1,1) = u + c (s - u) with cure fraction c.
    Range side_effect{0.85, 0.995};
    Range untreated{0.2, 0.8};
    Range cure{0.5, 0.98};
    Range interaction_penalty{0.7, 0.98};
    Range harm_penalty{0.3, 0.9};

    std::uint64_t seed = 0;
};

/// Deterministic in the spec. Throws InvalidArgument for infeasible specs.
/// Output is canonical (ids sorted) and passes validate_kb.
KnowledgeBase generate_kb(const GeneratorSpec& spec);

struct FindingsDensity {
    double present = 0.15;
    double absent = 0.25;
    double unobserved = 0.6;
};

Findings random_findings(const KnowledgeBase& kb, const FindingsDensity& density, std::uint64_t seed);

}  // namespace dxr
