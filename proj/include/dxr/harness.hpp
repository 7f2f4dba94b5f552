#pragma once
// Experiments: agreement between reduced and comprehensive solutions, a
// constructed disagreement, and the cost proxy.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dxr/decision.hpp"
#include "dxr/formulation.hpp"
#include "dxr/generate.hpp"
#include "dxr/kb.hpp"

namespace dxr {

struct SoundnessSpec {
    std::size_t n_cases = 500;
    GeneratorSpec kb_spec{};
    FindingsDensity findings_density{};
    std::uint64_t seed = 7;
    Policy policy{};
};

struct CaseResult {
    std::size_t index = 0;
    std::uint64_t kb_seed = 0;
    std::uint64_t findings_seed = 0;
    bool skipped = false;   // findings impossible under the generated KB
    bool agree = true;
    std::vector<std::string> differing;   // treatment ids
    std::vector<std::string> active;      // treatments left ACTIVE by pruning
    std::uint64_t op_count_comprehensive = 0;
    std::uint64_t op_count_reduced = 0;
    std::size_t nodes_before = 0;
    std::size_t nodes_after = 0;
    std::map<std::string, bool> comprehensive_best;
    std::map<std::string, bool> reduced_best;
};

struct SoundnessReport {
    std::size_t n_cases = 0;
    std::size_t n_agreements = 0;
    std::size_t n_skipped = 0;
    std::vector<CaseResult> cases;   // index order
    double mean_op_count_comprehensive = 0.0;
    double mean_op_count_reduced = 0.0;

    double agreement_rate() const;
    std::vector<const CaseResult*> disagreements() const;
};

/// KB seed of case i is derive_seed(seed, 2i), findings seed derive_seed(seed, 2i+1).
/// Cases run concurrently; the report equals the sequential one.
SoundnessReport run_soundness_experiment(const SoundnessSpec& spec);

/// Regenerates one case of an experiment.
CaseResult run_case(const SoundnessSpec& spec, std::size_t index);

json soundness_to_json(const SoundnessReport& r, const SoundnessSpec& spec);

struct UnsoundCase {
    std::uint64_t seed = 0;
    std::uint64_t attempt_seed = 0;
    KnowledgeBase kb;
    Findings findings;
    std::string treatment;                 // the treatment pruned in error
    std::vector<std::string> diseases;     // the two diseases it treats
    // Per disease: an extra strongly linked manifestation, unobserved in `findings`.
    std::map<std::string, std::string> strengthening;
    std::map<std::string, bool> comprehensive_best;
    std::map<std::string, bool> reduced_best;
};

/// One treatment with side effects treating two diseases whose posteriors sit
/// just below their thresholds. Verified before returning; throws Error if
/// no verified case is found.
UnsoundCase find_unsound_case(std::uint64_t seed);

/// Findings of `c` with the strengthening manifestation of `disease` present.
Findings strengthened_findings(const UnsoundCase& c, const std::string& disease);

json unsound_to_json(const UnsoundCase& c);

struct CostReport {
    std::uint64_t op_count_reduced = 0;
    std::uint64_t op_count_comprehensive = 0;
    std::size_t nodes_before = 0;   // diseases + treatments + subvalue nodes
    std::size_t nodes_after = 0;
};

CostReport cost_report(const Model& model, const Findings& findings, const Policy& policy = {},
                       const DecisionOptions& opts = {});
json cost_to_json(const CostReport& c);

std::size_t decision_model_nodes(const Model& model);

}  // namespace dxr
