#pragma once
// Case-specific reduction of the comprehensive decision model.
//
// 1. Posteriors (or posterior bounds) for every disease given the findings.
// 2. A treatment is clamped false when, for every disease it treats, the
//    posterior upper bound is below that pair's threshold.
// 3. Subvalue nodes whose decision parents are all clamped are dropped, then
//    every node no longer connected to the value node.
// 4. Remaining treatments split into components that share no subvalue node;
//    each component is solved on its own.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dxr/decision.hpp"
#include "dxr/inference.hpp"
#include "dxr/kb.hpp"

namespace dxr {

enum class PruneStatus { ClampedFalse, Active };

struct PruneJustification {
    std::string disease;
    double upper = 0.0;
    std::optional<double> threshold;   // nullopt = unattainable
};

struct PruneDecision {
    std::string treatment;
    PruneStatus status = PruneStatus::Active;
    std::vector<PruneJustification> justification;
};

struct Component {
    std::vector<std::string> treatments;
    std::vector<std::string> subvalues;
    std::vector<std::string> diseases;
};

struct Provenance {
    std::string kb_hash;
    std::string findings_hash;
    std::string thresholds_hash;
    std::string method;
    std::uint64_t budget = 0;
};

struct ReducedModel {
    std::set<std::string> active_treatments;
    std::set<std::string> active_subvalues;
    std::set<std::string> retained_diseases;
    std::vector<Component> components;   // ordered by first treatment id
    Provenance provenance;

    std::size_t n_nodes() const { return active_treatments.size() + active_subvalues.size() + retained_diseases.size(); }
};

enum class Source { Pruned, Solved };

struct TreatmentChoice {
    bool decision = false;
    Source source = Source::Pruned;
    std::optional<std::size_t> component;
};

struct Recommendation {
    std::map<std::string, TreatmentChoice> treatments;
    std::vector<double> eu_by_component;
    std::uint64_t op_count = 0;   // EU evaluations across components
};

/// Point estimates count as degenerate intervals. Throws StaleThresholdsError
/// when the table belongs to another KB, InvalidArgument when a disease is
/// missing from the report.
std::vector<PruneDecision> prune_treatments(const Model& model, const ThresholdTable& thresholds,
                                            const PosteriorReport& posteriors);

ReducedModel reduce_model(const Model& model, const std::vector<PruneDecision>& prune);

/// Components are solved concurrently; results do not depend on scheduling.
Recommendation solve_reduced(const Model& model, const ReducedModel& reduced, const JointEngine& engine,
                             const DecisionOptions& opts = {});

Assignment recommended_assignment(const Model& model, const Recommendation& rec);

struct Policy {
    std::string method = "auto";        // auto | quickscore | bounds | oracle | montecarlo
    std::uint64_t budget = 4096;        // bounds: states enumerated
    std::size_t samples = 200000;       // montecarlo
    std::uint64_t seed = 0;             // montecarlo
    bool allow_unsafe_mc = false;       // MC point estimates used as if they were bounds
    std::size_t auto_quickscore_limit = 12;   // auto: quickscore up to this many positive findings

    /// Throws InvalidArgument for unknown method names.
    void check() const;
};

struct Formulation {
    PosteriorReport posteriors;
    std::vector<PruneDecision> prune;
    ReducedModel reduced;
    Recommendation recommendation;
};

PosteriorReport infer(const Model& model, const Findings& findings, const Policy& policy,
                      const InferenceOptions& opts = {});

Formulation formulate(const Model& model, const Findings& findings, const ThresholdTable& thresholds,
                      const Policy& policy = {}, const DecisionOptions& opts = {});

std::string_view status_name(PruneStatus s);
std::string_view source_name(Source s);

json prune_to_json(const std::vector<PruneDecision>& prune);
json reduced_to_json(const ReducedModel& m);
json recommendation_to_json(const Recommendation& r);
json policy_to_json(const Policy& p);
Policy policy_from_json(const json& j);

}  // namespace dxr
