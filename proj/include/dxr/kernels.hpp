#pragma once
// Inner loops of exact and sampled noisy-OR inference.
//
// Every kernel exists twice. `serial::` is the straightforward reference
// loop. `parallel::` splits the same work into a fixed number of chunks that
// OpenMP threads evaluate independently; partial sums are combined in chunk
// order, so results are bit-identical for any thread count (they differ from
// the serial reference only by floating-point summation order).
//
// Sums are unnormalized and expressed relative to a per-kernel scale:
// likelihood = total * exp(log_scale). Posteriors are ratios of sums, so the
// scale cancels.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dxr/kb.hpp"

namespace dxr::kernels {

struct PositiveFinding {
    double leak_complement;                               // 1 - leak
    std::vector<std::pair<std::size_t, double>> links;   // (disease, 1 - strength)
};

/// Noisy-OR evidence for one (model, findings) pair. Negative findings are
/// absorbed into per-disease factors in one pass over their links.
struct NoisyOrEvidence {
    std::vector<double> prior;
    std::vector<double> neg_q;       // prod over absent findings of (1 - s_jm)
    double log_neg_leak = 0.0;       // sum over absent findings of log(1 - leak_m)
    std::vector<PositiveFinding> positive;
    std::size_t n_absent = 0;

    std::size_t n_diseases() const { return prior.size(); }
};

NoisyOrEvidence make_evidence(const Model& model, const Evidence& evidence);

struct MarginalSums {
    double total = 0.0;
    std::vector<double> on;   // mass with disease j present
    double log_scale = 0.0;
};

struct JointSums {
    double total = 0.0;
    std::vector<double> joint;   // index bit k <-> subset[k] present
    double log_scale = 0.0;
};

struct WeightedSums {
    double total = 0.0;
    std::vector<double> on;
    std::size_t nonzero = 0;   // samples with positive weight
};

/// P(findings | state) / exp(log_neg_leak); `on[j]` nonzero iff disease j present.
double state_likelihood(const NoisyOrEvidence& ev, std::span<const std::uint8_t> on);

/// Inclusion-exclusion over subsets of positive findings. Each term is taken
/// relative to the empty-subset term, the one of largest magnitude.
namespace serial {
MarginalSums quickscore_marginals(const NoisyOrEvidence& ev);
JointSums quickscore_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset);
MarginalSums enumerate_marginals(const NoisyOrEvidence& ev);
JointSums enumerate_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset);
WeightedSums likelihood_weighting(const NoisyOrEvidence& ev, std::size_t n_samples, std::uint64_t seed);
}  // namespace serial

namespace parallel {
MarginalSums quickscore_marginals(const NoisyOrEvidence& ev);
JointSums quickscore_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset);
MarginalSums enumerate_marginals(const NoisyOrEvidence& ev);
JointSums enumerate_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset);
WeightedSums likelihood_weighting(const NoisyOrEvidence& ev, std::size_t n_samples, std::uint64_t seed);
}  // namespace parallel

// Samples per likelihood-weighting chunk; chunk c draws from
// Rng(derive_seed(seed, c)) in both variants.
inline constexpr std::size_t kSamplesPerChunk = 4096;

}  // namespace dxr::kernels
