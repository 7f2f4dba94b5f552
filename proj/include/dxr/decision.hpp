#pragma once
// Multiplicative utility model, expected-utility maximization over treatment
// assignments, and per-(treatment, disease) probability thresholds.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dxr/inference.hpp"
#include "dxr/kb.hpp"
#include "dxr/kb_io.hpp"

namespace dxr {

/// One entry per model treatment, nonzero = administer.
using Assignment = std::vector<std::uint8_t>;

std::map<std::string, bool> named_assignment(const Model& model, const Assignment& a);
/// Throws InvalidArgument unless `named` covers every treatment exactly.
Assignment assignment_from_names(const Model& model, const std::map<std::string, bool>& named);

struct DecisionOptions {
    std::size_t brute_force_cap = 16;   // max treatments enumerated jointly
    double tie_tolerance = 1e-12;       // EUs closer than this are ties
    InferenceOptions inference{};
};

/// Product over all subvalue nodes of the table entry at the induced parent state.
double utility_of_state(const Model& model, std::span<const std::uint8_t> diseases, std::span<const std::uint8_t> treatments);

/// E[prod of the given subvalue nodes | findings] for treatment assignments,
/// over the exact joint posterior of exactly the diseases those nodes read.
class UtilityEvaluator {
public:
    UtilityEvaluator(const Model& model, std::vector<std::size_t> subvalues, const JointEngine& engine);

    double operator()(const Assignment& a) const;
    const std::vector<std::size_t>& diseases() const { return diseases_; }

private:
    struct Node {
        const Model::CSubvalue* sv;
        std::vector<std::size_t> positions;   // of each disease parent within diseases_
    };
    std::vector<Node> nodes_;
    std::vector<std::size_t> diseases_;
    std::vector<double> joint_;
};

double expected_utility(const Model& model, const Assignment& a, const JointEngine& engine);
double expected_utility(const Model& model, const Findings& findings, const Assignment& a, const DecisionOptions& opts = {});

struct ComprehensiveSolution {
    Assignment best;
    double eu = 0.0;
    std::vector<double> eu_by_assignment;   // index bit i = treatment i
    std::uint64_t op_count = 0;              // EU evaluations
};

ComprehensiveSolution solve_comprehensive(const Model& model, const JointEngine& engine, const DecisionOptions& opts = {});
ComprehensiveSolution solve_comprehensive(const Model& model, const Findings& findings, const DecisionOptions& opts = {});

/// Exhaustive argmax over 2^k assignments of `k` binary choices. Ties (within
/// tolerance of the maximum) go to the fewest true choices, then to the
/// lexicographically smallest sorted list of true-choice ids.
struct Maximum {
    std::uint64_t mask = 0;
    double eu = 0.0;
    std::vector<double> eus;
};
Maximum maximize(std::size_t k, const std::function<double(std::uint64_t)>& eu,
                 const std::function<const std::string&(std::size_t)>& id_of, double tie_tolerance);

/// Utilities of the isolated pair submodel: every other disease and treatment
/// false. Index by (disease, treatment) bits.
struct PairUtilities {
    double u00 = 1.0;   // healthy, untreated
    double u01 = 1.0;   // healthy, treated
    double u10 = 1.0;   // sick, untreated
    double u11 = 1.0;   // sick, treated
};

PairUtilities pair_utilities(const Model& model, std::size_t treatment, std::size_t disease);

/// Infimum of disease probabilities at which treating is strictly better, or
/// nullopt (unattainable) when no probability in [0,1] warrants treatment.
std::optional<double> threshold_from_utilities(const PairUtilities& u);
std::optional<double> compute_threshold(const Model& model, std::string_view treatment, std::string_view disease);

struct ThresholdTable {
    std::string kb_hash;
    std::map<std::pair<std::string, std::string>, std::optional<double>> entries;   // (treatment, disease)

    /// Throws InvalidArgument for a pair absent from the table.
    std::optional<double> at(const std::string& treatment, const std::string& disease) const;
    bool operator==(const ThresholdTable&) const = default;
};

/// Pairs evaluated concurrently; result independent of evaluation order.
ThresholdTable threshold_table(const Model& model);

/// {"kb_hash": ..., "thresholds": {"treatment:disease": number | null}}
json thresholds_to_json(const ThresholdTable& t);
ThresholdTable thresholds_from_json(const json& j);

}  // namespace dxr
