#include "dxr/formulation.hpp"

#include <algorithm>
#include <exception>
#include <numeric>

namespace dxr {

std::string_view status_name(PruneStatus s) { return s == PruneStatus::ClampedFalse ? "CLAMPED_FALSE" : "ACTIVE"; }
std::string_view source_name(Source s) { return s == Source::Pruned ? "PRUNED" : "SOLVED"; }

std::vector<PruneDecision> prune_treatments(const Model& model, const ThresholdTable& thresholds,
                                            const PosteriorReport& posteriors) {
    if (thresholds.kb_hash != model.hash()) {
        throw StaleThresholdsError("threshold table was computed for a different knowledge base");
    }
    std::vector<PruneDecision> out;
    for (std::size_t i = 0; i < model.n_treatments(); ++i) {
        PruneDecision dec{model.treatment_id(i), PruneStatus::ClampedFalse, {}};
        for (std::size_t d : model.treatment(i).treats) {
            const auto& did = model.disease_id(d);
            auto j = posteriors.index_of(did);
            if (!j) throw InvalidArgument("posterior report has no entry for disease '" + did + "'");
            const double upper = posteriors.upper[*j];
            const auto threshold = thresholds.at(model.treatment_id(i), did);
            // An unattainable threshold can never be reached through this pair.
            const bool below = !threshold || upper < *threshold;
            if (!below) dec.status = PruneStatus::Active;
            dec.justification.push_back({did, upper, threshold});
        }
        out.push_back(std::move(dec));
    }
    return out;
}

ReducedModel reduce_model(const Model& model, const std::vector<PruneDecision>& prune) {
    std::vector<std::uint8_t> active(model.n_treatments(), 0);
    std::vector<std::uint8_t> covered(model.n_treatments(), 0);
    for (const auto& p : prune) {
        auto i = model.treatment_index(p.treatment);
        if (!i) throw InvalidArgument("prune decision for unknown treatment '" + p.treatment + "'");
        covered[*i] = 1;
        active[*i] = p.status == PruneStatus::Active;
    }
    if (std::find(covered.begin(), covered.end(), 0) != covered.end()) {
        throw InvalidArgument("prune decisions must cover every treatment");
    }

    // (1) drop subvalue nodes whose decision parents are all clamped false.
    std::vector<std::uint8_t> keep(model.n_subvalues(), 0);
    for (std::size_t k = 0; k < model.n_subvalues(); ++k) {
        const auto& ts = model.subvalue(k).treatments;
        keep[k] = std::any_of(ts.begin(), ts.end(), [&](std::size_t t) { return active[t] != 0; });
    }

    // (2) keep only nodes still connected to the value node. The value node's
    // neighbours are the kept subvalue nodes; theirs are the parents. Clamped
    // treatments are instantiated and no longer decision nodes.
    ReducedModel m;
    std::vector<std::size_t> parent(model.n_treatments());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t k = 0; k < model.n_subvalues(); ++k) {
        if (!keep[k]) continue;
        const auto& sv = model.subvalue(k);
        m.active_subvalues.insert(model.subvalue_id(k));
        for (std::size_t d : sv.diseases) m.retained_diseases.insert(model.disease_id(d));
        std::optional<std::size_t> first;
        for (std::size_t t : sv.treatments) {
            if (!active[t]) continue;
            m.active_treatments.insert(model.treatment_id(t));
            if (first) {
                parent[find(t)] = find(*first);
            } else {
                first = t;
            }
        }
    }

    // Components: treatments joined through shared kept subvalue nodes.
    std::map<std::size_t, Component> by_root;
    for (std::size_t t = 0; t < model.n_treatments(); ++t) {
        if (active[t]) by_root[find(t)].treatments.push_back(model.treatment_id(t));
    }
    for (std::size_t k = 0; k < model.n_subvalues(); ++k) {
        if (!keep[k]) continue;
        const auto& sv = model.subvalue(k);
        const auto t = *std::find_if(sv.treatments.begin(), sv.treatments.end(), [&](std::size_t x) { return active[x] != 0; });
        auto& comp = by_root[find(t)];
        comp.subvalues.push_back(model.subvalue_id(k));
        for (std::size_t d : sv.diseases) comp.diseases.push_back(model.disease_id(d));
    }
    for (auto& [_, comp] : by_root) {
        std::sort(comp.treatments.begin(), comp.treatments.end());
        std::sort(comp.subvalues.begin(), comp.subvalues.end());
        std::sort(comp.diseases.begin(), comp.diseases.end());
        comp.diseases.erase(std::unique(comp.diseases.begin(), comp.diseases.end()), comp.diseases.end());
        m.components.push_back(std::move(comp));
    }
    std::sort(m.components.begin(), m.components.end(),
              [](const Component& a, const Component& b) { return a.treatments.front() < b.treatments.front(); });
    return m;
}

Recommendation solve_reduced(const Model& model, const ReducedModel& reduced, const JointEngine& engine,
                             const DecisionOptions& opts) {
    Recommendation rec;
    for (std::size_t i = 0; i < model.n_treatments(); ++i) {
        rec.treatments[model.treatment_id(i)] = {false, Source::Pruned, std::nullopt};
    }

    const std::size_t n_comp = reduced.components.size();
    std::vector<Maximum> results(n_comp);
    std::vector<std::exception_ptr> errors(n_comp);

#pragma omp parallel for schedule(dynamic) if (n_comp > 1)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_comp); ++c) {
        try {
            const auto& comp = reduced.components[c];
            if (comp.treatments.size() > opts.brute_force_cap || comp.treatments.size() >= 63) {
                throw CapExceededError("component " + std::to_string(c) + " has " + std::to_string(comp.treatments.size()) +
                                       " treatments, cap is " + std::to_string(opts.brute_force_cap));
            }
            std::vector<std::size_t> ts, svs;
            for (const auto& id : comp.treatments) ts.push_back(*model.treatment_index(id));
            for (const auto& id : comp.subvalues) {
                for (std::size_t k = 0; k < model.n_subvalues(); ++k) {
                    if (model.subvalue_id(k) == id) svs.push_back(k);
                }
            }
            std::optional<UtilityEvaluator> evaluate;
            try {
                evaluate.emplace(model, svs, engine);
            } catch (const CapExceededError& e) {
                throw CapExceededError("component " + std::to_string(c) + ": " + e.what());
            }
            // Treatments outside the component are either clamped false or
            // never read by the component's subvalue nodes.
            Assignment a(model.n_treatments(), 0);
            auto eu = [&](std::uint64_t mask) {
                for (std::size_t k = 0; k < ts.size(); ++k) a[ts[k]] = (mask >> k) & 1U;
                return (*evaluate)(a);
            };
            auto id_of = [&](std::size_t k) -> const std::string& { return comp.treatments[k]; };
            results[c] = maximize(ts.size(), eu, id_of, opts.tie_tolerance);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (std::size_t c = 0; c < n_comp; ++c) {
        const auto& comp = reduced.components[c];
        for (std::size_t k = 0; k < comp.treatments.size(); ++k) {
            rec.treatments[comp.treatments[k]] = {((results[c].mask >> k) & 1U) != 0, Source::Solved, c};
        }
        rec.eu_by_component.push_back(results[c].eu);
        rec.op_count += results[c].eus.size();
    }
    return rec;
}

Assignment recommended_assignment(const Model& model, const Recommendation& rec) {
    Assignment a(model.n_treatments(), 0);
    for (std::size_t i = 0; i < model.n_treatments(); ++i) a[i] = rec.treatments.at(model.treatment_id(i)).decision;
    return a;
}

void Policy::check() const {
    if (method != "auto" && method != "quickscore" && method != "bounds" && method != "oracle" && method != "montecarlo" &&
        method != "mc") {
        throw InvalidArgument("unknown inference method '" + method + "'");
    }
    if ((method == "montecarlo" || method == "mc") && !allow_unsafe_mc) {
        throw InvalidArgument("montecarlo estimates carry no bound guarantee; set allow_unsafe_mc to prune with them");
    }
    if (budget < 1) throw InvalidArgument("policy budget must be at least 1");
    if (samples < 1) throw InvalidArgument("policy samples must be at least 1");
}

PosteriorReport infer(const Model& model, const Findings& findings, const Policy& policy, const InferenceOptions& opts) {
    policy.check();
    std::string method = policy.method;
    if (method == "auto") method = findings.present.size() <= policy.auto_quickscore_limit ? "quickscore" : "bounds";
    switch (*parse_method(method)) {
        case Method::Oracle: return oracle_posteriors(model, findings, opts);
        case Method::Quickscore: return quickscore_posteriors(model, findings, opts);
        case Method::Bounds: return bounded_posteriors(model, findings, policy.budget, opts);
        case Method::MonteCarlo: return mc_posteriors(model, findings, {policy.samples, policy.seed}, opts);
    }
    throw InvalidArgument("unreachable inference method");
}

namespace {

// Everything pruned: nothing to solve, no joint needed.
struct NoJoint final : JointEngine {
    std::vector<double> joint(std::span<const std::size_t>) const override {
        throw InvalidArgument("no joint engine available");
    }
    std::size_t cap() const override { return 0; }
};

}  // namespace

Formulation formulate(const Model& model, const Findings& findings, const ThresholdTable& thresholds, const Policy& policy,
                      const DecisionOptions& opts) {
    Formulation f;
    f.posteriors = infer(model, findings, policy, opts.inference);
    f.prune = prune_treatments(model, thresholds, f.posteriors);
    f.reduced = reduce_model(model, f.prune);
    f.reduced.provenance = {model.hash(), findings_hash(findings), sha256_hex(thresholds_to_json(thresholds).dump()),
                            std::string(method_name(f.posteriors.method)), f.posteriors.budget_used};
    if (f.reduced.components.empty()) {
        f.recommendation = solve_reduced(model, f.reduced, NoJoint{}, opts);
    } else if (findings.present.size() <= opts.inference.quickscore_cap) {
        f.recommendation = solve_reduced(model, f.reduced, QuickscoreJoint(model, findings, opts.inference), opts);
    } else {
        f.recommendation = solve_reduced(model, f.reduced, EnumerationJoint(model, findings, opts.inference), opts);
    }
    return f;
}

json prune_to_json(const std::vector<PruneDecision>& prune) {
    json out = json::array();
    for (const auto& p : prune) {
        json just = json::array();
        for (const auto& j : p.justification) {
            just.push_back({{"disease", j.disease}, {"upper", j.upper}, {"threshold", j.threshold ? json(*j.threshold) : json(nullptr)}});
        }
        out.push_back({{"treatment", p.treatment}, {"status", status_name(p.status)}, {"justification", just}});
    }
    return out;
}

json reduced_to_json(const ReducedModel& m) {
    json comps = json::array();
    for (const auto& c : m.components) {
        comps.push_back({{"treatments", c.treatments}, {"subvalues", c.subvalues}, {"diseases", c.diseases}});
    }
    const auto& p = m.provenance;
    return {{"active_treatments", m.active_treatments},
            {"active_subvalues", m.active_subvalues},
            {"retained_diseases", m.retained_diseases},
            {"components", comps},
            {"provenance",
             {{"kb_hash", p.kb_hash}, {"findings_hash", p.findings_hash}, {"thresholds_hash", p.thresholds_hash},
              {"method", p.method}, {"budget", p.budget}}}};
}

json recommendation_to_json(const Recommendation& r) {
    json ts = json::object();
    for (const auto& [id, c] : r.treatments) {
        ts[id] = {{"decision", c.decision}, {"source", source_name(c.source)},
                  {"component", c.component ? json(*c.component) : json(nullptr)}};
    }
    return {{"treatments", ts}, {"eu_by_component", r.eu_by_component}, {"op_count", r.op_count}};
}

json policy_to_json(const Policy& p) {
    return {{"method", p.method}, {"budget", p.budget}, {"samples", p.samples}, {"seed", p.seed},
            {"allow_unsafe_mc", p.allow_unsafe_mc}, {"auto_quickscore_limit", p.auto_quickscore_limit}};
}

Policy policy_from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("policy must be a JSON object");
    Policy p;
    try {
        p.method = j.value("method", p.method);
        p.budget = j.value("budget", p.budget);
        p.samples = j.value("samples", p.samples);
        p.seed = j.value("seed", p.seed);
        p.allow_unsafe_mc = j.value("allow_unsafe_mc", p.allow_unsafe_mc);
        p.auto_quickscore_limit = j.value("auto_quickscore_limit", p.auto_quickscore_limit);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("policy: ") + e.what());
    }
    p.check();
    return p;
}

}  // namespace dxr
