#include "dxr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "dxr/kb_io.hpp"
#include "dxr/random.hpp"

namespace dxr {

std::size_t decision_model_nodes(const Model& model) {
    return model.n_diseases() + model.n_treatments() + model.n_subvalues();
}

double SoundnessReport::agreement_rate() const {
    const std::size_t n = n_cases - n_skipped;
    return n == 0 ? 1.0 : static_cast<double>(n_agreements) / static_cast<double>(n);
}

std::vector<const CaseResult*> SoundnessReport::disagreements() const {
    std::vector<const CaseResult*> out;
    for (const auto& c : cases) {
        if (!c.skipped && !c.agree) out.push_back(&c);
    }
    return out;
}

namespace {

void check_spec(const SoundnessSpec& spec) {
    if (spec.kb_spec.n_diseases > 12 || spec.kb_spec.n_treatments > 8) {
        throw InvalidArgument("soundness experiment: KB spec exceeds 12 diseases or 8 treatments");
    }
    spec.policy.check();
}

}  // namespace

CaseResult run_case(const SoundnessSpec& spec, std::size_t index) {
    CaseResult r;
    r.index = index;
    r.kb_seed = derive_seed(spec.seed, 2 * index);
    r.findings_seed = derive_seed(spec.seed, 2 * index + 1);

    GeneratorSpec gs = spec.kb_spec;
    gs.seed = r.kb_seed;
    const Model model(generate_kb(gs));
    const Findings findings = random_findings(model.kb(), spec.findings_density, r.findings_seed);
    r.nodes_before = decision_model_nodes(model);

    DecisionOptions opts;
    opts.inference.parallel = false;   // cases already run concurrently
    try {
        const auto thresholds = threshold_table(model);
        const auto f = formulate(model, findings, thresholds, spec.policy, opts);
        const auto full = solve_comprehensive(model, findings, opts);
        r.comprehensive_best = named_assignment(model, full.best);
        r.reduced_best = named_assignment(model, recommended_assignment(model, f.recommendation));
        for (const auto& [id, on] : r.comprehensive_best) {
            if (r.reduced_best.at(id) != on) r.differing.push_back(id);
        }
        r.active.assign(f.reduced.active_treatments.begin(), f.reduced.active_treatments.end());
        r.agree = r.differing.empty();
        r.op_count_comprehensive = full.op_count;
        r.op_count_reduced = f.recommendation.op_count;
        r.nodes_after = f.reduced.n_nodes();
    } catch (const ZeroLikelihoodError&) {
        r.skipped = true;
        r.nodes_after = r.nodes_before;
    }
    return r;
}

SoundnessReport run_soundness_experiment(const SoundnessSpec& spec) {
    check_spec(spec);
    SoundnessReport rep;
    rep.n_cases = spec.n_cases;
    rep.cases.resize(spec.n_cases);
    std::vector<std::exception_ptr> errors(spec.n_cases);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(spec.n_cases); ++i) {
        try {
            rep.cases[i] = run_case(spec, static_cast<std::size_t>(i));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    double sum_full = 0.0, sum_reduced = 0.0;
    for (const auto& c : rep.cases) {
        if (c.skipped) {
            ++rep.n_skipped;
            continue;
        }
        rep.n_agreements += c.agree;
        sum_full += static_cast<double>(c.op_count_comprehensive);
        sum_reduced += static_cast<double>(c.op_count_reduced);
    }
    const std::size_t n = rep.n_cases - rep.n_skipped;
    if (n > 0) {
        rep.mean_op_count_comprehensive = sum_full / static_cast<double>(n);
        rep.mean_op_count_reduced = sum_reduced / static_cast<double>(n);
    }
    return rep;
}

namespace {

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

json generator_json(const GeneratorSpec& g) {
    return {{"n_diseases", g.n_diseases},
            {"n_manifestations", g.n_manifestations},
            {"n_treatments", g.n_treatments},
            {"links_per_manifestation", g.links_per_manifestation},
            {"prior", range_json(g.prior)},
            {"strength", range_json(g.strength)},
            {"leak", range_json(g.leak)},
            {"two_disease_prob", g.two_disease_prob},
            {"interaction_prob", g.interaction_prob},
            {"harm_prob", g.harm_prob},
            {"exclusive_treatments", g.exclusive_treatments},
            {"side_effect", range_json(g.side_effect)},
            {"untreated", range_json(g.untreated)},
            {"cure", range_json(g.cure)},
            {"interaction_penalty", range_json(g.interaction_penalty)},
            {"harm_penalty", range_json(g.harm_penalty)}};
}

}  // namespace

json soundness_to_json(const SoundnessReport& r, const SoundnessSpec& spec) {
    json cases = json::array();
    json disagreements = json::array();
    for (const auto& c : r.cases) {
        json jc = {{"index", c.index},
                   {"kb_seed", c.kb_seed},
                   {"findings_seed", c.findings_seed},
                   {"skipped", c.skipped},
                   {"agree", c.agree},
                   {"differing", c.differing},
                   {"active", c.active},
                   {"op_count_comprehensive", c.op_count_comprehensive},
                   {"op_count_reduced", c.op_count_reduced},
                   {"nodes_before", c.nodes_before},
                   {"nodes_after", c.nodes_after}};
        if (!c.skipped && !c.agree) {
            disagreements.push_back({{"index", c.index}, {"kb_seed", c.kb_seed}, {"findings_seed", c.findings_seed},
                                     {"differing", c.differing}, {"comprehensive_best", c.comprehensive_best},
                                     {"reduced_best", c.reduced_best}});
        }
        cases.push_back(std::move(jc));
    }
    const auto& d = spec.findings_density;
    return {{"spec",
             {{"n_cases", spec.n_cases},
              {"seed", spec.seed},
              {"kb_spec", generator_json(spec.kb_spec)},
              {"findings_density", {{"present", d.present}, {"absent", d.absent}, {"unobserved", d.unobserved}}},
              {"policy", policy_to_json(spec.policy)}}},
            {"n_cases", r.n_cases},
            {"n_agreements", r.n_agreements},
            {"n_skipped", r.n_skipped},
            {"agreement_rate", r.agreement_rate()},
            {"mean_op_count_comprehensive", r.mean_op_count_comprehensive},
            {"mean_op_count_reduced", r.mean_op_count_reduced},
            {"disagreement_cases", disagreements},
            {"cases", cases}};
}

// ---------------------------------------------------------------------------

namespace {

struct UnsoundParams {
    double side_effect, untreated, treated;
    double prior[2];
    double margin;       // posterior sits this fraction below the threshold
    double strength;     // of the observed manifestation
};

KnowledgeBase unsound_kb(const UnsoundParams& p, const double leak[2]) {
    KnowledgeBase kb;
    const char* ds[2] = {"d1", "d2"};
    for (int k = 0; k < 2; ++k) {
        kb.diseases.push_back({ds[k], std::string("disease ") + ds[k], p.prior[k]});
        kb.manifestations.push_back({std::string("m") + ds[k], "observed sign of " + std::string(ds[k]), leak[k],
                                     {{ds[k], p.strength}}});
        kb.manifestations.push_back({std::string("s") + ds[k], "specific test for " + std::string(ds[k]), 0.01,
                                     {{ds[k], 0.9}}});
    }
    kb.treatments.push_back({"a", "treatment a", {"d1", "d2"}});
    for (int k = 0; k < 2; ++k) {
        SubvalueNode u;
        u.id = std::string("u_") + ds[k];
        u.disease_parents = {ds[k]};
        u.treatment_parents = {"a"};
        u.table = {{"00", 1.0}, {"01", p.side_effect}, {"10", p.untreated}, {"11", p.treated}};
        kb.subvalues.push_back(std::move(u));
    }
    return canonicalize(std::move(kb));
}

}  // namespace

UnsoundCase find_unsound_case(std::uint64_t seed) {
    constexpr int kAttempts = 200;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(attempt));
        Rng rng(s);
        UnsoundParams p{};
        p.side_effect = rng.uniform(0.9, 0.97);
        p.untreated = rng.uniform(0.2, 0.5);
        p.treated = rng.uniform(0.85, 0.98);
        p.prior[0] = rng.uniform(0.005, 0.04);
        p.prior[1] = rng.uniform(0.005, 0.04);
        p.margin = rng.uniform(0.02, 0.15);
        p.strength = rng.uniform(0.6, 0.95);

        // Isolated pair: treating also incurs the other node's side effect.
        const PairUtilities pu{1.0, p.side_effect * p.side_effect, p.untreated, p.treated * p.side_effect};
        const auto threshold = threshold_from_utilities(pu);
        if (!threshold || *threshold <= 0.0) continue;

        // Leak chosen so that the positive finding lifts the posterior to target.
        double leak[2];
        bool ok = true;
        for (int k = 0; k < 2; ++k) {
            const double target = *threshold * (1.0 - p.margin);
            const double lr = (target / (1.0 - target)) / (p.prior[k] / (1.0 - p.prior[k]));
            leak[k] = p.strength / (lr - (1.0 - p.strength));
            ok = ok && lr > 1.0 && leak[k] > 0.0 && leak[k] < 1.0;
        }
        if (!ok) continue;

        UnsoundCase c;
        c.seed = seed;
        c.attempt_seed = s;
        c.kb = unsound_kb(p, leak);
        c.findings = Findings::make({"md1", "md2"}, {});
        c.treatment = "a";
        c.diseases = {"d1", "d2"};
        c.strengthening = {{"d1", "sd1"}, {"d2", "sd2"}};

        const Model model(c.kb);
        const auto thresholds = threshold_table(model);
        const auto f = formulate(model, c.findings, thresholds);
        const auto full = solve_comprehensive(model, c.findings);
        c.comprehensive_best = named_assignment(model, full.best);
        c.reduced_best = named_assignment(model, recommended_assignment(model, f.recommendation));
        if (c.comprehensive_best.at("a") && !c.reduced_best.at("a")) return c;
    }
    throw Error("find_unsound_case: no verified disagreement after " + std::to_string(kAttempts) + " attempts");
}

Findings strengthened_findings(const UnsoundCase& c, const std::string& disease) {
    Findings f = c.findings;
    f.present.insert(c.strengthening.at(disease));
    return f;
}

json unsound_to_json(const UnsoundCase& c) {
    json strengthening = json::object();
    for (const auto& [d, m] : c.strengthening) strengthening[d] = m;
    return {{"seed", c.seed},
            {"attempt_seed", c.attempt_seed},
            {"kb", kb_to_json(c.kb)},
            {"findings", findings_to_json(c.findings)},
            {"treatment", c.treatment},
            {"diseases", c.diseases},
            {"strengthening", strengthening},
            {"comprehensive_best", c.comprehensive_best},
            {"reduced_best", c.reduced_best},
            {"disagree", c.comprehensive_best != c.reduced_best}};
}

CostReport cost_report(const Model& model, const Findings& findings, const Policy& policy, const DecisionOptions& opts) {
    const auto f = formulate(model, findings, threshold_table(model), policy, opts);
    const auto full = solve_comprehensive(model, findings, opts);
    return {f.recommendation.op_count, full.op_count, decision_model_nodes(model), f.reduced.n_nodes()};
}

json cost_to_json(const CostReport& c) {
    return {{"op_count_reduced", c.op_count_reduced},
            {"op_count_comprehensive", c.op_count_comprehensive},
            {"nodes_before", c.nodes_before},
            {"nodes_after", c.nodes_after}};
}

}  // namespace dxr
