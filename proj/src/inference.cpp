#include "dxr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

namespace dxr {

namespace {

// Results within this many binary128 ulps per term of zero are treated as
// zero likelihood.
constexpr double kQuadNoisePerTerm = 1e-32;

PosteriorReport blank_report(const Model& model, Method method) {
    PosteriorReport r;
    r.method = method;
    for (std::size_t j = 0; j < model.n_diseases(); ++j) r.ids.push_back(model.disease_id(j));
    return r;
}

void check_subset(std::span<const std::size_t> subset, std::size_t n, std::size_t cap) {
    if (subset.size() > cap) {
        throw CapExceededError("joint posterior over " + std::to_string(subset.size()) + " diseases exceeds cap " +
                               std::to_string(cap));
    }
    std::set<std::size_t> seen;
    for (std::size_t j : subset) {
        if (j >= n) throw InvalidArgument("joint posterior: disease index out of range");
        if (!seen.insert(j).second) throw InvalidArgument("joint posterior: disease listed twice");
    }
}

void check_enumerable(const Model& model, const InferenceOptions& opts) {
    if (model.n_diseases() > opts.enumeration_cap || model.n_diseases() >= 63) {
        throw CapExceededError("enumeration over " + std::to_string(model.n_diseases()) + " diseases exceeds cap " +
                               std::to_string(opts.enumeration_cap));
    }
}

void check_quickscore(const Evidence& ev, const InferenceOptions& opts) {
    if (ev.present.size() > opts.quickscore_cap || ev.present.size() >= 63) {
        throw CapExceededError("quickscore over " + std::to_string(ev.present.size()) + " positive findings exceeds cap " +
                               std::to_string(opts.quickscore_cap));
    }
}

std::vector<double> normalized(const kernels::JointSums& sums, double noise_floor) {
    if (!(sums.total > noise_floor)) throw ZeroLikelihoodError("findings have zero likelihood under the model");
    std::vector<double> out(sums.joint.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::clamp(sums.joint[t] / sums.total, 0.0, 1.0);
    return out;
}

// Lazily enumerates disease states in non-increasing prior probability.
// A state is the mode state with a set of diseases flipped; flipping disease
// j costs |log odds_j|, so states come out in non-decreasing total cost.
// Standard k-best subset-sum expansion: each popped node spawns "extend with
// the next cheaper-ranked flip" and "replace its last flip with the next".
class StateEnumerator {
public:
    explicit StateEnumerator(const std::vector<double>& prior) : prior_(prior), n_(prior.size()) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        cost_.resize(n_);
        mode_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            mode_[j] = prior[j] > 0.5 ? 1 : 0;
            cost_[j] = std::abs(std::log(prior[j]) - std::log1p(-prior[j]));
        }
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return cost_[a] < cost_[b]; });
    }

    // Writes the next state into `state`; false when all states are exhausted.
    bool next(std::vector<std::uint8_t>& state) {
        if (!started_) {
            started_ = true;
            state = mode_;
            if (n_ > 0) push(cost_[order_[0]], 0, kRoot);
            return true;
        }
        if (heap_.empty()) return false;
        const Entry e = heap_.top();
        heap_.pop();
        const std::size_t id = nodes_.size();
        nodes_.push_back({e.pos, e.parent});
        if (e.pos + 1 < n_) {
            const double next_cost = cost_[order_[e.pos + 1]];
            push(e.sum + next_cost, e.pos + 1, id);
            push(e.sum - cost_[order_[e.pos]] + next_cost, e.pos + 1, e.parent);
        }
        state = mode_;
        for (std::size_t k = id; k != kRoot; k = nodes_[k].parent) {
            const std::size_t j = order_[nodes_[k].pos];
            state[j] ^= 1U;
        }
        return true;
    }

private:
    static constexpr std::size_t kRoot = static_cast<std::size_t>(-1);

    struct Node {
        std::size_t pos;      // rank of the last flipped disease in order_
        std::size_t parent;   // node holding the remaining flips
    };
    struct Entry {
        double sum;
        std::uint64_t seq;
        std::size_t pos;
        std::size_t parent;
        bool operator>(const Entry& o) const { return sum != o.sum ? sum > o.sum : seq > o.seq; }
    };

    void push(double sum, std::size_t pos, std::size_t parent) { heap_.push({sum, seq_++, pos, parent}); }

    const std::vector<double>& prior_;
    std::size_t n_;
    std::vector<std::size_t> order_;
    std::vector<double> cost_;
    std::vector<std::uint8_t> mode_;
    std::vector<Node> nodes_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
    std::uint64_t seq_ = 0;
    bool started_ = false;
};

// Extremes of P(findings | state) / exp(log_neg_leak) over all states with
// disease j fixed to v. Noisy-OR is monotone in every disease, so per-finding
// extremes sit at "all other linked diseases on" or "all off"; the product of
// per-finding extremes bounds the product.
struct LikelihoodRange {
    double min[2];
    double max[2];
};

std::vector<LikelihoodRange> likelihood_ranges(const kernels::NoisyOrEvidence& ev) {
    const std::size_t n = ev.n_diseases();
    // prod of neg_q over k != j without dividing (neg_q may be zero).
    std::vector<double> prefix(n + 1, 1.0), suffix(n + 1, 1.0);
    for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] * ev.neg_q[k];
    for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] * ev.neg_q[k];

    std::vector<LikelihoodRange> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        // Absent findings: max with every other disease off, min with all on.
        const double others = prefix[j] * suffix[j + 1];
        out[j].max[0] = 1.0;
        out[j].max[1] = ev.neg_q[j];
        out[j].min[0] = others;
        out[j].min[1] = others * ev.neg_q[j];
    }
    for (const auto& pf : ev.positive) {
        // Leak complement times c_k over linked k != j; unlinked j see every link.
        std::vector<double> own(n, 1.0);
        std::vector<double> others_on(n, pf.leak_complement);
        for (const auto& [k, c] : pf.links) {
            own[k] = c;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != k) others_on[j] *= c;
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (int v = 0; v < 2; ++v) {
                const double mine = v ? own[j] : 1.0;
                out[j].max[v] *= 1.0 - others_on[j] * mine;
                out[j].min[v] *= 1.0 - pf.leak_complement * mine;
            }
        }
    }
    return out;
}

}  // namespace

std::string_view method_name(Method m) {
    switch (m) {
        case Method::Oracle: return "oracle";
        case Method::Quickscore: return "quickscore";
        case Method::Bounds: return "bounds";
        case Method::MonteCarlo: return "mc";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
    if (name == "oracle") return Method::Oracle;
    if (name == "quickscore") return Method::Quickscore;
    if (name == "bounds") return Method::Bounds;
    if (name == "mc" || name == "montecarlo") return Method::MonteCarlo;
    return std::nullopt;
}

std::optional<std::size_t> PosteriorReport::index_of(std::string_view id) const {
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] == id) return j;
    }
    return std::nullopt;
}

json report_to_json(const PosteriorReport& r) {
    json posts = json::object();
    for (std::size_t j = 0; j < r.size(); ++j) {
        posts[r.ids[j]] = r.interval ? json::array({r.lower[j], r.upper[j]}) : json(r.lower[j]);
    }
    json j = {{"method", method_name(r.method)}, {"budget_used", r.budget_used}, {"op_count", r.op_count},
              {"outer_terms", r.outer_terms},   {"status", r.status},           {"interval", r.interval},
              {"posteriors", posts}};
    if (r.evidence_likelihood) j["evidence_likelihood"] = *r.evidence_likelihood;
    return j;
}

PosteriorReport report_from_json(const json& j) {
    PosteriorReport r;
    auto m = parse_method(j.at("method").get<std::string>());
    if (!m) throw ParseError("report: unknown method");
    r.method = *m;
    r.budget_used = j.at("budget_used").get<std::uint64_t>();
    r.op_count = j.at("op_count").get<std::uint64_t>();
    r.outer_terms = j.value("outer_terms", std::uint64_t{0});
    r.status = j.value("status", std::string("ok"));
    r.interval = j.value("interval", false);
    if (j.contains("evidence_likelihood")) r.evidence_likelihood = j.at("evidence_likelihood").get<double>();
    for (const auto& [id, v] : j.at("posteriors").items()) {
        r.ids.push_back(id);
        if (v.is_array()) {
            r.interval = true;
            r.lower.push_back(v.at(0).get<double>());
            r.upper.push_back(v.at(1).get<double>());
        } else {
            r.lower.push_back(v.get<double>());
            r.upper.push_back(v.get<double>());
        }
    }
    return r;
}

PosteriorReport oracle_posteriors(const Model& model, const Findings& findings, const InferenceOptions& opts) {
    check_enumerable(model, opts);
    const auto ev = kernels::make_evidence(model, model.resolve(findings));
    const auto sums = opts.parallel ? kernels::parallel::enumerate_marginals(ev) : kernels::serial::enumerate_marginals(ev);
    if (!(sums.total > 0.0)) throw ZeroLikelihoodError("findings have zero likelihood under the model");

    PosteriorReport r = blank_report(model, Method::Oracle);
    for (std::size_t j = 0; j < model.n_diseases(); ++j) {
        const double p = std::clamp(sums.on[j] / sums.total, 0.0, 1.0);
        r.lower.push_back(p);
        r.upper.push_back(p);
    }
    r.budget_used = r.op_count = std::uint64_t{1} << model.n_diseases();
    r.evidence_likelihood = sums.total * std::exp(sums.log_scale);
    return r;
}

PosteriorReport quickscore_posteriors(const Model& model, const Findings& findings, const InferenceOptions& opts) {
    const Evidence evidence = model.resolve(findings);
    check_quickscore(evidence, opts);
    const auto ev = kernels::make_evidence(model, evidence);
    const auto sums = opts.parallel ? kernels::parallel::quickscore_marginals(ev) : kernels::serial::quickscore_marginals(ev);

    const std::uint64_t terms = std::uint64_t{1} << evidence.present.size();
    if (!(sums.total > kQuadNoisePerTerm * static_cast<double>(terms))) {
        throw ZeroLikelihoodError("findings have zero likelihood under the model");
    }
    PosteriorReport r = blank_report(model, Method::Quickscore);
    for (std::size_t j = 0; j < model.n_diseases(); ++j) {
        const double p = std::clamp(sums.on[j] / sums.total, 0.0, 1.0);
        r.lower.push_back(p);
        r.upper.push_back(p);
    }
    const std::uint64_t n = model.n_diseases();
    r.outer_terms = terms;
    r.budget_used = terms;
    // Cost model: n disease factors per outer term, plus n per absorbed negative finding.
    r.op_count = terms * n + n * evidence.absent.size();
    r.evidence_likelihood = sums.total * std::exp(sums.log_scale);
    return r;
}

constexpr double kResidualSlack = 1e-15;

PosteriorReport bounded_posteriors(const Model& model, const Findings& findings, std::uint64_t budget,
                                   const InferenceOptions&) {
    if (budget < 1) throw InvalidArgument("bounds: budget must be at least 1");
    const auto ev = kernels::make_evidence(model, model.resolve(findings));
    const std::size_t n = model.n_diseases();
    const auto& prior = model.priors();

    const bool finite_space = n < 63;
    const std::uint64_t n_states = finite_space ? (std::uint64_t{1} << n) : UINT64_MAX;
    const std::uint64_t target = std::min(budget, n_states);

    double mass = 0.0;                 // sum of prior * likelihood over enumerated states
    std::vector<double> mass_on(n, 0.0);
    std::vector<double> prior_on(n, 0.0), prior_off(n, 0.0);
    double prior_seen = 0.0;

    const auto ranges = likelihood_ranges(ev);
    double global_max = 0.0;
    for (const auto& r : ranges) global_max = std::max({global_max, r.max[0], r.max[1]});

    // Bounds after every prefix of the enumeration are intersected, so a
    // larger budget can only narrow an interval.
    std::vector<double> lower(n, 0.0), upper(n, 1.0);
    auto tighten = [&]() {
        for (std::size_t j = 0; j < n; ++j) {
            // Residual prior masses, nudged up to absorb rounding in the running sums.
            const double r1 = std::max(0.0, prior[j] - prior_on[j]) + kResidualSlack;
            const double r0 = std::max(0.0, (1.0 - prior[j]) - prior_off[j]) + kResidualSlack;
            const double on = mass_on[j];
            const double off = mass - mass_on[j];
            // Posterior (on + U) / (on + U + off + V) rises with U, falls with V.
            const double hi_num = on + r1 * ranges[j].max[1];
            const double hi_den = hi_num + off + r0 * ranges[j].min[0];
            const double lo_num = on + r1 * ranges[j].min[1];
            const double lo_den = lo_num + off + r0 * ranges[j].max[0];
            const double lo = lo_den > 0.0 ? std::clamp(lo_num / lo_den, 0.0, 1.0) : 0.0;
            const double hi = hi_den > 0.0 ? std::clamp(hi_num / hi_den, 0.0, 1.0) : 1.0;
            const double next_lo = std::max(lower[j], std::min(lo, hi));
            const double next_hi = std::min(upper[j], std::max(lo, hi));
            // Near collapse, rounding can cross the ends; keep the last interval.
            if (next_lo <= next_hi) {
                lower[j] = next_lo;
                upper[j] = next_hi;
            }
        }
    };
    tighten();

    StateEnumerator states(prior);
    std::vector<std::uint8_t> state;
    std::uint64_t used = 0;
    while (used < target && states.next(state)) {
        double pi = 1.0;
        for (std::size_t j = 0; j < n; ++j) pi *= state[j] ? prior[j] : 1.0 - prior[j];
        const double w = pi * kernels::state_likelihood(ev, state);
        mass += w;
        prior_seen += pi;
        for (std::size_t j = 0; j < n; ++j) {
            if (state[j]) {
                mass_on[j] += w;
                prior_on[j] += pi;
            } else {
                prior_off[j] += pi;
            }
        }
        ++used;
        if (!(finite_space && used == n_states)) tighten();
    }
    const bool exhausted = finite_space && used == n_states;

    const double residual = exhausted ? 0.0 : std::max(0.0, 1.0 - prior_seen);
    if (mass == 0.0 && (residual == 0.0 || global_max == 0.0)) {
        throw ZeroLikelihoodError("findings have zero likelihood under the model");
    }

    PosteriorReport r = blank_report(model, Method::Bounds);
    r.interval = true;
    for (std::size_t j = 0; j < n; ++j) {
        if (exhausted) {
            // Exact; kept inside the running interval so it never widens.
            const double p = std::clamp(mass_on[j] / mass, lower[j], upper[j]);
            lower[j] = upper[j] = p;
        }
        r.lower.push_back(lower[j]);
        r.upper.push_back(upper[j]);
    }
    r.budget_used = used;
    r.op_count = used;
    return r;
}

PosteriorReport mc_posteriors(const Model& model, const Findings& findings, const SampleBudget& budget,
                              const InferenceOptions& opts) {
    if (budget.n_samples < 1) throw InvalidArgument("mc: n_samples must be at least 1");
    const auto ev = kernels::make_evidence(model, model.resolve(findings));
    const auto sums = opts.parallel ? kernels::parallel::likelihood_weighting(ev, budget.n_samples, budget.seed)
                                    : kernels::serial::likelihood_weighting(ev, budget.n_samples, budget.seed);

    PosteriorReport r = blank_report(model, Method::MonteCarlo);
    r.budget_used = r.op_count = budget.n_samples;
    r.evidence_likelihood = sums.total / static_cast<double>(budget.n_samples) * std::exp(ev.log_neg_leak);
    if (sums.nonzero == 0 || !(sums.total > 0.0)) {
        // No sample explains the findings: report vacuous intervals.
        r.status = "all_weights_zero";
        r.interval = true;
        r.lower.assign(model.n_diseases(), 0.0);
        r.upper.assign(model.n_diseases(), 1.0);
        return r;
    }
    for (std::size_t j = 0; j < model.n_diseases(); ++j) {
        const double p = std::clamp(sums.on[j] / sums.total, 0.0, 1.0);
        r.lower.push_back(p);
        r.upper.push_back(p);
    }
    return r;
}

std::map<std::string, double> joint_posterior(const Model& model, const Findings& findings,
                                              const std::vector<std::string>& subset, const InferenceOptions& opts) {
    std::vector<std::size_t> ix;
    for (const auto& id : subset) {
        auto j = model.disease_index(id);
        if (!j) throw InvalidArgument("joint posterior: unknown disease '" + id + "'");
        ix.push_back(*j);
    }
    const auto probs = EnumerationJoint(model, findings, opts).joint(ix);
    std::map<std::string, double> out;
    for (std::size_t t = 0; t < probs.size(); ++t) out.emplace(bitstring(t, ix.size()), probs[t]);
    return out;
}

QuickscoreJoint::QuickscoreJoint(const Model& model, const Findings& findings, InferenceOptions opts) : opts_(opts) {
    const Evidence evidence = model.resolve(findings);
    check_quickscore(evidence, opts_);
    ev_ = kernels::make_evidence(model, evidence);
}

std::vector<double> QuickscoreJoint::joint(std::span<const std::size_t> subset) const {
    check_subset(subset, ev_.n_diseases(), opts_.joint_cap);
    const auto sums = opts_.parallel ? kernels::parallel::quickscore_joint(ev_, subset)
                                     : kernels::serial::quickscore_joint(ev_, subset);
    const double terms = std::ldexp(1.0, static_cast<int>(ev_.positive.size()));
    return normalized(sums, kQuadNoisePerTerm * terms * static_cast<double>(sums.joint.size()));
}

EnumerationJoint::EnumerationJoint(const Model& model, const Findings& findings, InferenceOptions opts) : opts_(opts) {
    check_enumerable(model, opts_);
    ev_ = kernels::make_evidence(model, model.resolve(findings));
}

std::vector<double> EnumerationJoint::joint(std::span<const std::size_t> subset) const {
    check_subset(subset, ev_.n_diseases(), opts_.joint_cap);
    const auto sums = opts_.parallel ? kernels::parallel::enumerate_joint(ev_, subset)
                                     : kernels::serial::enumerate_joint(ev_, subset);
    return normalized(sums, 0.0);
}

}  // namespace dxr
