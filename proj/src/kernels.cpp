#include "dxr/kernels.hpp"

#include <bit>
#include <cmath>

#include <omp.h>

#include "dxr/random.hpp"

namespace dxr::kernels {

NoisyOrEvidence make_evidence(const Model& model, const Evidence& evidence) {
    NoisyOrEvidence ev;
    ev.prior = model.priors();
    ev.neg_q.assign(model.n_diseases(), 1.0);
    for (std::size_t m : evidence.absent) {
        const auto& man = model.manifestation(m);
        ev.log_neg_leak += std::log1p(-man.leak);
        for (const auto& l : man.links) ev.neg_q[l.disease] *= 1.0 - l.strength;
    }
    ev.n_absent = evidence.absent.size();
    for (std::size_t m : evidence.present) {
        const auto& man = model.manifestation(m);
        PositiveFinding pf{1.0 - man.leak, {}};
        for (const auto& l : man.links) pf.links.emplace_back(l.disease, 1.0 - l.strength);
        ev.positive.push_back(std::move(pf));
    }
    return ev;
}

double state_likelihood(const NoisyOrEvidence& ev, std::span<const std::uint8_t> on) {
    double w = 1.0;
    for (std::size_t j = 0; j < on.size(); ++j) {
        if (on[j]) w *= ev.neg_q[j];
    }
    for (const auto& pf : ev.positive) {
        double off = pf.leak_complement;
        for (const auto& [j, c] : pf.links) {
            if (on[j]) off *= c;
        }
        w *= 1.0 - off;
    }
    return w;
}

namespace {

constexpr std::size_t kMaxChunks = 256;
// Below this much work a parallel region costs more than it saves.
constexpr std::uint64_t kParallelWork = 1U << 14;

struct ChunkRange {
    std::uint64_t begin, end;
};

ChunkRange chunk_range(std::uint64_t count, std::size_t chunks, std::size_t c) {
    return {count * c / chunks, count * (c + 1) / chunks};
}

std::size_t chunk_count(std::uint64_t count) {
    return static_cast<std::size_t>(std::min<std::uint64_t>(count, kMaxChunks));
}

// Inclusion-exclusion terms cancel down to the evidence likelihood, which can
// be many orders of magnitude below the individual terms. Terms and their
// running sums are therefore kept in binary128.
using qreal = __float128;

// Evaluates inclusion-exclusion terms relative to the empty-subset term.
class QuickscoreTerms {
public:
    explicit QuickscoreTerms(const NoisyOrEvidence& ev) : ev_(ev), f0_(ev.n_diseases()) {
        log_scale_ = ev.log_neg_leak;
        for (std::size_t j = 0; j < f0_.size(); ++j) {
            f0_[j] = (1 - qreal(ev.prior[j])) + qreal(ev.prior[j]) * ev.neg_q[j];
            log_scale_ += std::log(static_cast<double>(f0_[j]));
        }
    }

    double log_scale() const { return log_scale_; }
    std::uint64_t n_terms() const { return std::uint64_t{1} << ev_.positive.size(); }

    struct Scratch {
        std::vector<qreal> q, f, factors;
    };

    // q_j(S), plus the sign and leak part of the term for subset `mask`.
    qreal prepare(std::uint64_t mask, Scratch& s) const {
        s.q.assign(ev_.neg_q.begin(), ev_.neg_q.end());
        qreal lead = (std::popcount(mask) & 1) ? -1 : 1;
        for (std::size_t m = 0; m < ev_.positive.size(); ++m) {
            if (!((mask >> m) & 1U)) continue;
            const auto& pf = ev_.positive[m];
            lead *= pf.leak_complement;
            for (const auto& [j, c] : pf.links) s.q[j] *= c;
        }
        return lead;
    }

    void add_marginals(std::uint64_t mask, Scratch& s, qreal& total, std::vector<qreal>& on) const {
        qreal term = prepare(mask, s);
        const std::size_t n = f0_.size();
        s.f.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            s.f[j] = (1 - qreal(ev_.prior[j])) + ev_.prior[j] * s.q[j];
            term *= s.f[j] / f0_[j];
        }
        total += term;
        for (std::size_t j = 0; j < n; ++j) on[j] += term * (ev_.prior[j] * s.q[j] / s.f[j]);
    }

    void add_joint(std::uint64_t mask, std::span<const std::size_t> subset, const std::vector<std::uint8_t>& in_subset,
                   Scratch& s, qreal& total, std::vector<qreal>& joint) const {
        qreal base = prepare(mask, s);
        for (std::size_t j = 0; j < f0_.size(); ++j) {
            if (!in_subset[j]) base *= ((1 - qreal(ev_.prior[j])) + ev_.prior[j] * s.q[j]) / f0_[j];
        }
        // Outer product over the clamped subset, built by doubling.
        s.factors.assign(1, base);
        for (std::size_t k = 0; k < subset.size(); ++k) {
            const std::size_t j = subset[k];
            const qreal on = ev_.prior[j] * s.q[j] / f0_[j];
            const qreal off = (1 - qreal(ev_.prior[j])) / f0_[j];
            const std::size_t half = s.factors.size();
            s.factors.resize(2 * half);
            for (std::size_t t = 0; t < half; ++t) {
                s.factors[t + half] = s.factors[t] * on;
                s.factors[t] *= off;
            }
        }
        for (std::size_t t = 0; t < s.factors.size(); ++t) {
            joint[t] += s.factors[t];
            total += s.factors[t];
        }
    }

private:
    const NoisyOrEvidence& ev_;
    std::vector<qreal> f0_;
    double log_scale_ = 0.0;
};

struct QuadMarginals {
    qreal total = 0;
    std::vector<qreal> on;
};

struct QuadJoint {
    qreal total = 0;
    std::vector<qreal> joint;
};

MarginalSums to_double(const QuadMarginals& q, double log_scale) {
    MarginalSums out{static_cast<double>(q.total), {}, log_scale};
    for (qreal v : q.on) out.on.push_back(static_cast<double>(v));
    return out;
}

JointSums to_double(const QuadJoint& q, double log_scale) {
    JointSums out{static_cast<double>(q.total), {}, log_scale};
    for (qreal v : q.joint) out.joint.push_back(static_cast<double>(v));
    return out;
}

// Prior-times-likelihood weight of a full state (bit j of `state` = disease j).
double enumeration_weight(const NoisyOrEvidence& ev, std::uint64_t state) {
    double w = 1.0;
    for (std::size_t j = 0; j < ev.prior.size(); ++j) {
        w *= ((state >> j) & 1U) ? ev.prior[j] * ev.neg_q[j] : 1.0 - ev.prior[j];
    }
    for (const auto& pf : ev.positive) {
        double off = pf.leak_complement;
        for (const auto& [j, c] : pf.links) {
            if ((state >> j) & 1U) off *= c;
        }
        w *= 1.0 - off;
    }
    return w;
}

std::vector<std::uint8_t> membership(std::size_t n, std::span<const std::size_t> subset) {
    std::vector<std::uint8_t> in(n, 0);
    for (std::size_t j : subset) in[j] = 1;
    return in;
}

std::uint64_t project(std::uint64_t state, std::span<const std::size_t> subset) {
    std::uint64_t t = 0;
    for (std::size_t k = 0; k < subset.size(); ++k) t |= ((state >> subset[k]) & 1U) << k;
    return t;
}

// One likelihood-weighting chunk drawn from its own stream.
void weight_chunk(const NoisyOrEvidence& ev, std::size_t n_samples, std::uint64_t seed, std::size_t chunk,
                  WeightedSums& out, std::vector<std::uint8_t>& state) {
    Rng rng(derive_seed(seed, chunk));
    const std::size_t n = ev.n_diseases();
    for (std::size_t i = 0; i < n_samples; ++i) {
        for (std::size_t j = 0; j < n; ++j) state[j] = rng.uniform() < ev.prior[j] ? 1 : 0;
        const double w = state_likelihood(ev, state);
        if (w > 0.0) ++out.nonzero;
        out.total += w;
        for (std::size_t j = 0; j < n; ++j) {
            if (state[j]) out.on[j] += w;
        }
    }
}

std::size_t lw_chunks(std::size_t n_samples) { return (n_samples + kSamplesPerChunk - 1) / kSamplesPerChunk; }

std::size_t lw_chunk_size(std::size_t n_samples, std::size_t c) {
    return std::min(kSamplesPerChunk, n_samples - c * kSamplesPerChunk);
}

}  // namespace

namespace serial {

MarginalSums quickscore_marginals(const NoisyOrEvidence& ev) {
    QuickscoreTerms terms(ev);
    QuadMarginals acc{0, std::vector<qreal>(ev.n_diseases(), 0)};
    QuickscoreTerms::Scratch scratch;
    for (std::uint64_t mask = 0; mask < terms.n_terms(); ++mask) terms.add_marginals(mask, scratch, acc.total, acc.on);
    return to_double(acc, terms.log_scale());
}

JointSums quickscore_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset) {
    QuickscoreTerms terms(ev);
    QuadJoint acc{0, std::vector<qreal>(std::size_t{1} << subset.size(), 0)};
    const auto in = membership(ev.n_diseases(), subset);
    QuickscoreTerms::Scratch scratch;
    for (std::uint64_t mask = 0; mask < terms.n_terms(); ++mask) {
        terms.add_joint(mask, subset, in, scratch, acc.total, acc.joint);
    }
    return to_double(acc, terms.log_scale());
}

MarginalSums enumerate_marginals(const NoisyOrEvidence& ev) {
    const std::size_t n = ev.n_diseases();
    MarginalSums out{0.0, std::vector<double>(n, 0.0), ev.log_neg_leak};
    for (std::uint64_t state = 0; state < (std::uint64_t{1} << n); ++state) {
        const double w = enumeration_weight(ev, state);
        out.total += w;
        for (std::size_t j = 0; j < n; ++j) {
            if ((state >> j) & 1U) out.on[j] += w;
        }
    }
    return out;
}

JointSums enumerate_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset) {
    const std::size_t n = ev.n_diseases();
    JointSums out{0.0, std::vector<double>(std::size_t{1} << subset.size(), 0.0), ev.log_neg_leak};
    for (std::uint64_t state = 0; state < (std::uint64_t{1} << n); ++state) {
        const double w = enumeration_weight(ev, state);
        out.total += w;
        out.joint[project(state, subset)] += w;
    }
    return out;
}

WeightedSums likelihood_weighting(const NoisyOrEvidence& ev, std::size_t n_samples, std::uint64_t seed) {
    // Per-chunk partials summed in chunk order, as in the parallel kernel.
    const std::size_t n = ev.n_diseases();
    WeightedSums out{0.0, std::vector<double>(n, 0.0), 0};
    std::vector<std::uint8_t> state(n);
    for (std::size_t c = 0; c < lw_chunks(n_samples); ++c) {
        WeightedSums p{0.0, std::vector<double>(n, 0.0), 0};
        weight_chunk(ev, lw_chunk_size(n_samples, c), seed, c, p, state);
        out.total += p.total;
        out.nonzero += p.nonzero;
        for (std::size_t j = 0; j < n; ++j) out.on[j] += p.on[j];
    }
    return out;
}

}  // namespace serial

namespace parallel {

MarginalSums quickscore_marginals(const NoisyOrEvidence& ev) {
    QuickscoreTerms terms(ev);
    const std::size_t n = ev.n_diseases();
    const std::uint64_t count = terms.n_terms();
    const std::size_t chunks = chunk_count(count);
    std::vector<QuadMarginals> partial(chunks, QuadMarginals{0, std::vector<qreal>(n, 0)});

#pragma omp parallel for schedule(dynamic) if (count * (n + 1) >= kParallelWork)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        QuickscoreTerms::Scratch scratch;
        auto& p = partial[c];
        const auto r = chunk_range(count, chunks, c);
        for (std::uint64_t mask = r.begin; mask < r.end; ++mask) terms.add_marginals(mask, scratch, p.total, p.on);
    }

    QuadMarginals acc{0, std::vector<qreal>(n, 0)};
    for (const auto& p : partial) {
        acc.total += p.total;
        for (std::size_t j = 0; j < n; ++j) acc.on[j] += p.on[j];
    }
    return to_double(acc, terms.log_scale());
}

JointSums quickscore_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset) {
    QuickscoreTerms terms(ev);
    const std::size_t width = std::size_t{1} << subset.size();
    const std::uint64_t count = terms.n_terms();
    const std::size_t chunks = chunk_count(count);
    const auto in = membership(ev.n_diseases(), subset);
    std::vector<QuadJoint> partial(chunks, QuadJoint{0, std::vector<qreal>(width, 0)});

#pragma omp parallel for schedule(dynamic) if (count * (ev.n_diseases() + width) >= kParallelWork)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        QuickscoreTerms::Scratch scratch;
        auto& p = partial[c];
        const auto r = chunk_range(count, chunks, c);
        for (std::uint64_t mask = r.begin; mask < r.end; ++mask) terms.add_joint(mask, subset, in, scratch, p.total, p.joint);
    }

    QuadJoint acc{0, std::vector<qreal>(width, 0)};
    for (const auto& p : partial) {
        acc.total += p.total;
        for (std::size_t t = 0; t < width; ++t) acc.joint[t] += p.joint[t];
    }
    return to_double(acc, terms.log_scale());
}

MarginalSums enumerate_marginals(const NoisyOrEvidence& ev) {
    const std::size_t n = ev.n_diseases();
    const std::uint64_t count = std::uint64_t{1} << n;
    const std::size_t chunks = chunk_count(count);
    std::vector<MarginalSums> partial(chunks, MarginalSums{0.0, std::vector<double>(n, 0.0), 0.0});

#pragma omp parallel for schedule(static) if (count * (n + 1) >= kParallelWork)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        auto& p = partial[c];
        const auto r = chunk_range(count, chunks, c);
        for (std::uint64_t state = r.begin; state < r.end; ++state) {
            const double w = enumeration_weight(ev, state);
            p.total += w;
            for (std::size_t j = 0; j < n; ++j) {
                if ((state >> j) & 1U) p.on[j] += w;
            }
        }
    }

    MarginalSums out{0.0, std::vector<double>(n, 0.0), ev.log_neg_leak};
    for (const auto& p : partial) {
        out.total += p.total;
        for (std::size_t j = 0; j < n; ++j) out.on[j] += p.on[j];
    }
    return out;
}

JointSums enumerate_joint(const NoisyOrEvidence& ev, std::span<const std::size_t> subset) {
    const std::size_t n = ev.n_diseases();
    const std::size_t width = std::size_t{1} << subset.size();
    const std::uint64_t count = std::uint64_t{1} << n;
    const std::size_t chunks = chunk_count(count);
    std::vector<JointSums> partial(chunks, JointSums{0.0, std::vector<double>(width, 0.0), 0.0});

#pragma omp parallel for schedule(static) if (count * (n + 1) >= kParallelWork)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        auto& p = partial[c];
        const auto r = chunk_range(count, chunks, c);
        for (std::uint64_t state = r.begin; state < r.end; ++state) {
            const double w = enumeration_weight(ev, state);
            p.total += w;
            p.joint[project(state, subset)] += w;
        }
    }

    JointSums out{0.0, std::vector<double>(width, 0.0), ev.log_neg_leak};
    for (const auto& p : partial) {
        out.total += p.total;
        for (std::size_t t = 0; t < width; ++t) out.joint[t] += p.joint[t];
    }
    return out;
}

WeightedSums likelihood_weighting(const NoisyOrEvidence& ev, std::size_t n_samples, std::uint64_t seed) {
    const std::size_t n = ev.n_diseases();
    const std::size_t chunks = lw_chunks(n_samples);
    std::vector<WeightedSums> partial(chunks, WeightedSums{0.0, std::vector<double>(n, 0.0), 0});

#pragma omp parallel for schedule(dynamic) if (chunks > 1)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        std::vector<std::uint8_t> state(n);
        weight_chunk(ev, lw_chunk_size(n_samples, c), seed, c, partial[c], state);
    }

    WeightedSums out{0.0, std::vector<double>(n, 0.0), 0};
    for (const auto& p : partial) {
        out.total += p.total;
        out.nonzero += p.nonzero;
        for (std::size_t j = 0; j < n; ++j) out.on[j] += p.on[j];
    }
    return out;
}

}  // namespace parallel

}  // namespace dxr::kernels
