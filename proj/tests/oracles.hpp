#pragma once
// Reference computations for tests. Written directly against the string-keyed
// KnowledgeBase in long double, sharing no code with the library solvers.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dxr/decision.hpp"
#include "dxr/inference.hpp"
#include "dxr/kb.hpp"

namespace oracle {

using dxr::Findings;
using dxr::KnowledgeBase;

inline std::map<std::string, std::size_t> disease_positions(const KnowledgeBase& kb) {
    std::map<std::string, std::size_t> pos;
    for (std::size_t j = 0; j < kb.diseases.size(); ++j) pos[kb.diseases[j].id] = j;
    return pos;
}

/// P(state, findings) for every disease state; bit j of the index is kb.diseases[j].
inline std::vector<long double> state_weights(const KnowledgeBase& kb, const Findings& f) {
    const auto pos = disease_positions(kb);
    const std::size_t n = kb.diseases.size();
    if (n > 22) throw std::invalid_argument("oracle: too many diseases");
    std::vector<long double> w(std::size_t{1} << n);
    for (std::size_t s = 0; s < w.size(); ++s) {
        long double p = 1.0L;
        for (std::size_t j = 0; j < n; ++j) {
            const long double prior = kb.diseases[j].prior;
            p *= ((s >> j) & 1U) ? prior : 1.0L - prior;
        }
        for (const auto& m : kb.manifestations) {
            const bool present = f.present.count(m.id) > 0;
            const bool absent = f.absent.count(m.id) > 0;
            if (!present && !absent) continue;
            long double off = 1.0L - m.leak;
            for (const auto& l : m.links) {
                if ((s >> pos.at(l.disease)) & 1U) off *= 1.0L - l.strength;
            }
            p *= present ? 1.0L - off : off;
        }
        w[s] = p;
    }
    return w;
}

inline long double evidence_likelihood(const KnowledgeBase& kb, const Findings& f) {
    long double z = 0.0L;
    for (auto x : state_weights(kb, f)) z += x;
    return z;
}

inline std::vector<double> posteriors(const KnowledgeBase& kb, const Findings& f) {
    const auto w = state_weights(kb, f);
    long double z = 0.0L;
    std::vector<long double> on(kb.diseases.size(), 0.0L);
    for (std::size_t s = 0; s < w.size(); ++s) {
        z += w[s];
        for (std::size_t j = 0; j < on.size(); ++j) {
            if ((s >> j) & 1U) on[j] += w[s];
        }
    }
    std::vector<double> out;
    for (auto x : on) out.push_back(static_cast<double>(x / z));
    return out;
}

/// Keyed by bitstring, char k = subset[k].
inline std::map<std::string, double> joint(const KnowledgeBase& kb, const Findings& f, const std::vector<std::string>& subset) {
    const auto pos = disease_positions(kb);
    const auto w = state_weights(kb, f);
    std::map<std::string, long double> acc;
    long double z = 0.0L;
    for (std::size_t s = 0; s < w.size(); ++s) {
        std::string key;
        for (const auto& id : subset) key += ((s >> pos.at(id)) & 1U) ? '1' : '0';
        acc[key] += w[s];
        z += w[s];
    }
    std::map<std::string, double> out;
    for (const auto& [k, v] : acc) out[k] = static_cast<double>(v / z);
    return out;
}

using Named = std::map<std::string, bool>;

inline long double utility(const KnowledgeBase& kb, std::size_t state, const Named& a) {
    const auto pos = disease_positions(kb);
    long double u = 1.0L;
    for (const auto& sv : kb.subvalues) {
        std::string key;
        for (const auto& d : sv.disease_parents) key += ((state >> pos.at(d)) & 1U) ? '1' : '0';
        for (const auto& t : sv.treatment_parents) key += a.at(t) ? '1' : '0';
        u *= sv.table.at(key);
    }
    return u;
}

inline double expected_utility(const KnowledgeBase& kb, const Findings& f, const Named& a) {
    const auto w = state_weights(kb, f);
    long double z = 0.0L, eu = 0.0L;
    for (std::size_t s = 0; s < w.size(); ++s) {
        z += w[s];
        eu += w[s] * utility(kb, s, a);
    }
    return static_cast<double>(eu / z);
}

/// Every (disease state, assignment) pair enumerated directly. Same tie rule
/// as the library: within tolerance, fewest true, then smallest sorted ids.
struct Best {
    Named assignment;
    double eu = 0.0;
    std::vector<double> eus;   // by assignment mask over kb.treatments order
};

inline Best best_assignment(const KnowledgeBase& kb, const Findings& f, double tol = 1e-12) {
    const std::size_t t = kb.treatments.size();
    const auto w = state_weights(kb, f);
    long double z = 0.0L;
    for (auto x : w) z += x;
    Best b;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << t); ++mask) {
        Named a;
        for (std::size_t i = 0; i < t; ++i) a[kb.treatments[i].id] = (mask >> i) & 1U;
        long double eu = 0.0L;
        for (std::size_t s = 0; s < w.size(); ++s) eu += w[s] * utility(kb, s, a);
        b.eus.push_back(static_cast<double>(eu / z));
    }
    double top = -1.0;
    for (double e : b.eus) top = std::max(top, e);
    std::optional<std::vector<std::string>> chosen;
    for (std::uint64_t mask = 0; mask < b.eus.size(); ++mask) {
        if (b.eus[mask] < top - tol) continue;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < t; ++i) {
            if ((mask >> i) & 1U) ids.push_back(kb.treatments[i].id);
        }
        std::sort(ids.begin(), ids.end());
        if (!chosen || ids.size() < chosen->size() || (ids.size() == chosen->size() && ids < *chosen)) {
            chosen = ids;
            b.eu = b.eus[mask];
            b.assignment.clear();
            for (std::size_t i = 0; i < t; ++i) b.assignment[kb.treatments[i].id] = (mask >> i) & 1U;
        }
    }
    return b;
}

/// Joint engine returning a fixed marginal for a one-disease model.
class FixedJoint final : public dxr::JointEngine {
public:
    explicit FixedJoint(double p) : p_(p) {}
    std::vector<double> joint(std::span<const std::size_t> subset) const override {
        if (subset.empty()) return {1.0};
        if (subset.size() != 1) throw std::invalid_argument("FixedJoint: one disease only");
        return {1.0 - p_, p_};
    }
    std::size_t cap() const override { return 1; }

private:
    double p_;
};

/// One disease, one treatment, one subvalue node with the given (00,01,10,11).
inline KnowledgeBase pair_kb(double u01, double u10, double u11) {
    KnowledgeBase kb;
    kb.diseases.push_back({"d", "d", 0.5});
    kb.treatments.push_back({"t", "t", {"d"}});
    dxr::SubvalueNode u;
    u.id = "u";
    u.disease_parents = {"d"};
    u.treatment_parents = {"t"};
    u.table = {{"00", 1.0}, {"01", u01}, {"10", u10}, {"11", u11}};
    kb.subvalues.push_back(u);
    return kb;
}

/// Threshold by sweeping p over grid midpoints (k + 0.5) / n and solving the
/// submodel exhaustively at each. Returns the first p at which treating wins.
inline std::optional<double> sweep_threshold(const dxr::Model& pair_model, int n = 10000) {
    for (int k = 0; k < n; ++k) {
        const double p = (k + 0.5) / n;
        const auto sol = dxr::solve_comprehensive(pair_model, FixedJoint(p));
        if (sol.best.at(0)) return p;
    }
    return std::nullopt;
}

/// Sweep agreement within `tol`; a closed form at or beyond the last grid
/// point agrees with an empty sweep.
inline bool sweep_agrees(std::optional<double> closed, std::optional<double> swept, int n = 10000, double tol = 2e-4) {
    if (!swept) return !closed || *closed >= 1.0 - 1.0 / n;
    if (!closed) return false;
    return std::abs(*closed - *swept) <= tol;
}

}  // namespace oracle
