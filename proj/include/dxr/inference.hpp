#pragma once
// Posterior disease probabilities given findings.
//
//   oracle      exact, full enumeration of disease states (small KBs only)
//   quickscore  exact, inclusion-exclusion over positive findings
//   bounds      anytime intervals from partial state enumeration
//   mc          likelihood weighting

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dxr/kb.hpp"
#include "dxr/kb_io.hpp"
#include "dxr/kernels.hpp"

namespace dxr {

enum class Method { Oracle, Quickscore, Bounds, MonteCarlo };

std::string_view method_name(Method m);
/// Accepts "oracle", "quickscore", "bounds", "mc" and "montecarlo".
std::optional<Method> parse_method(std::string_view name);

struct InferenceOptions {
    std::size_t enumeration_cap = 20;   // max diseases for full enumeration
    std::size_t quickscore_cap = 20;    // max positive findings
    std::size_t joint_cap = 16;         // max diseases in a joint posterior
    bool parallel = true;               // use the OpenMP kernels
};

struct PosteriorReport {
    Method method = Method::Oracle;
    bool interval = false;            // entries are [lower, upper] rather than points
    std::vector<std::string> ids;     // disease ids, model order
    std::vector<double> lower;
    std::vector<double> upper;        // equals `lower` for point methods
    std::uint64_t budget_used = 0;
    std::optional<double> evidence_likelihood;   // point methods only
    std::uint64_t op_count = 0;
    std::uint64_t outer_terms = 0;    // quickscore inclusion-exclusion terms
    std::string status = "ok";

    std::size_t size() const { return ids.size(); }
    double point(std::size_t j) const { return lower[j]; }
    std::optional<std::size_t> index_of(std::string_view id) const;
};

/// {"method","budget_used","op_count","outer_terms","status","interval",
///  "evidence_likelihood"?, "posteriors":{id: p | [lo,hi]}}
json report_to_json(const PosteriorReport& r);
PosteriorReport report_from_json(const json& j);

PosteriorReport oracle_posteriors(const Model& model, const Findings& findings, const InferenceOptions& opts = {});
PosteriorReport quickscore_posteriors(const Model& model, const Findings& findings, const InferenceOptions& opts = {});
PosteriorReport bounded_posteriors(const Model& model, const Findings& findings, std::uint64_t budget,
                                   const InferenceOptions& opts = {});

struct SampleBudget {
    std::size_t n_samples = 10000;
    std::uint64_t seed = 0;
};

PosteriorReport mc_posteriors(const Model& model, const Findings& findings, const SampleBudget& budget,
                              const InferenceOptions& opts = {});

/// Exact joint posterior over `subset`, keyed by bitstring (char k is
/// subset[k]). Uses full enumeration.
std::map<std::string, double> joint_posterior(const Model& model, const Findings& findings,
                                              const std::vector<std::string>& subset, const InferenceOptions& opts = {});

/// Supplies exact joint posteriors over disease subsets for one fixed set of
/// findings. Result index bit k corresponds to subset[k].
class JointEngine {
public:
    virtual ~JointEngine() = default;
    virtual std::vector<double> joint(std::span<const std::size_t> subset) const = 0;
    virtual std::size_t cap() const = 0;
};

/// Quickscore with the subset clamped: cost 2^|F+| * (n + 2^|subset|), any n.
class QuickscoreJoint final : public JointEngine {
public:
    QuickscoreJoint(const Model& model, const Findings& findings, InferenceOptions opts = {});
    std::vector<double> joint(std::span<const std::size_t> subset) const override;
    std::size_t cap() const override { return opts_.joint_cap; }

private:
    kernels::NoisyOrEvidence ev_;
    InferenceOptions opts_;
};

/// Full enumeration over all disease states; the reference engine.
class EnumerationJoint final : public JointEngine {
public:
    EnumerationJoint(const Model& model, const Findings& findings, InferenceOptions opts = {});
    std::vector<double> joint(std::span<const std::size_t> subset) const override;
    std::size_t cap() const override { return opts_.joint_cap; }

private:
    kernels::NoisyOrEvidence ev_;
    InferenceOptions opts_;
};

}  // namespace dxr
