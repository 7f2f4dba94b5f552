#include <doctest.h>

#include <algorithm>

#include "dxr/fixtures.hpp"
#include "dxr/formulation.hpp"
#include "dxr/generate.hpp"
#include "dxr/harness.hpp"
#include "dxr/random.hpp"
#include "oracles.hpp"

using namespace dxr;

namespace {

PosteriorReport report(const Model& model, std::vector<double> lower, std::vector<double> upper) {
    PosteriorReport r;
    r.method = Method::Bounds;
    r.interval = true;
    for (std::size_t j = 0; j < model.n_diseases(); ++j) r.ids.push_back(model.disease_id(j));
    r.lower = std::move(lower);
    r.upper = std::move(upper);
    return r;
}

PosteriorReport point_report(const Model& model, std::map<std::string, double> p, double rest = 0.0) {
    std::vector<double> v;
    for (std::size_t j = 0; j < model.n_diseases(); ++j) {
        auto it = p.find(model.disease_id(j));
        v.push_back(it == p.end() ? rest : it->second);
    }
    auto r = report(model, v, v);
    r.interval = false;
    return r;
}

std::vector<PruneDecision> clamp_only(const Model& model, std::set<std::string> clamped) {
    std::vector<PruneDecision> out;
    for (std::size_t i = 0; i < model.n_treatments(); ++i) {
        const auto& id = model.treatment_id(i);
        out.push_back({id, clamped.count(id) ? PruneStatus::ClampedFalse : PruneStatus::Active, {}});
    }
    return out;
}

std::set<std::string> clamped_set(const std::vector<PruneDecision>& prune) {
    std::set<std::string> out;
    for (const auto& p : prune) {
        if (p.status == PruneStatus::ClampedFalse) out.insert(p.treatment);
    }
    return out;
}

void check_invariants(const Model& model, const std::vector<PruneDecision>& prune, const ReducedModel& m,
                      const Recommendation& rec) {
    const auto clamped = clamped_set(prune);
    for (const auto& sid : m.active_subvalues) {
        const auto& sv = *std::find_if(model.kb().subvalues.begin(), model.kb().subvalues.end(),
                                       [&](const SubvalueNode& s) { return s.id == sid; });
        CHECK(std::any_of(sv.treatment_parents.begin(), sv.treatment_parents.end(),
                          [&](const std::string& t) { return !clamped.count(t); }));
        for (const auto& d : sv.disease_parents) CHECK(m.retained_diseases.count(d));
    }
    std::set<std::string> covered_t, covered_s;
    for (const auto& c : m.components) {
        for (const auto& t : c.treatments) {
            CHECK(covered_t.insert(t).second);
            CHECK(m.active_treatments.count(t));
            CHECK(!clamped.count(t));
        }
        for (const auto& s : c.subvalues) CHECK(covered_s.insert(s).second);
    }
    CHECK(covered_t == m.active_treatments);
    CHECK(covered_s == m.active_subvalues);
    for (const auto& d : m.retained_diseases) CHECK(model.disease_index(d));
    CHECK(m.n_nodes() <= model.n_diseases() + model.n_treatments() + model.n_subvalues());
    for (const auto& [id, choice] : rec.treatments) {
        if (choice.source == Source::Pruned) {
            CHECK(!choice.decision);
            CHECK(!choice.component);
            CHECK(!m.active_treatments.count(id));
        } else {
            REQUIRE(choice.component);
            const auto& comp = m.components.at(*choice.component);
            CHECK(std::count(comp.treatments.begin(), comp.treatments.end(), id) == 1);
        }
    }
}

}  // namespace

TEST_CASE("prune rule") {
    SUBCASE("sole treating pair below its threshold is clamped") {
        const Model model(fixtures::single_pair());
        const auto table = threshold_table(model);
        const auto prune = prune_treatments(model, table, point_report(model, {{"d", 0.05}}));
        REQUIRE(prune.size() == 1);
        CHECK(prune[0].status == PruneStatus::ClampedFalse);
        REQUIRE(prune[0].justification.size() == 1);
        CHECK(prune[0].justification[0].upper == 0.05);
        CHECK(*prune[0].justification[0].threshold == doctest::Approx(0.1 / 0.85));
        CHECK(prune_treatments(model, table, point_report(model, {{"d", 0.2}}))[0].status == PruneStatus::Active);
    }
    SUBCASE("one treated disease above threshold keeps the treatment") {
        const auto uc = find_unsound_case(3);
        const Model model(uc.kb);
        const auto table = threshold_table(model);
        const auto p = *table.at("a", "d1");
        const auto prune = prune_treatments(model, table, point_report(model, {{"d1", p + 0.01}, {"d2", 0.0}}));
        CHECK(prune[0].status == PruneStatus::Active);
    }
    SUBCASE("all thresholds unattainable") {
        auto kb = fixtures::single_pair();
        kb.subvalues[0].table = {{"00", 1.0}, {"01", 0.9}, {"10", 0.4}, {"11", 0.4}};
        const Model model(kb);
        const auto prune = prune_treatments(model, threshold_table(model), point_report(model, {{"d", 1.0}}));
        CHECK(prune[0].status == PruneStatus::ClampedFalse);
        CHECK(!prune[0].justification[0].threshold);
    }
    SUBCASE("upper bound equal to the threshold stays active") {
        const Model model(fixtures::single_pair());
        const auto table = threshold_table(model);
        const double p = *table.at("t", "d");
        CHECK(prune_treatments(model, table, report(model, {0.0}, {p}))[0].status == PruneStatus::Active);
    }
    SUBCASE("stale table and missing disease") {
        const Model model(fixtures::single_pair());
        auto table = threshold_table(model);
        const Model other(fixtures::single_pair(0.2));
        CHECK_THROWS_AS(prune_treatments(other, table, point_report(other, {})), StaleThresholdsError);
        auto r = point_report(model, {});
        r.ids = {"zz"};
        CHECK_THROWS_AS(prune_treatments(model, table, r), InvalidArgument);
    }
}

TEST_CASE("reduction of the two-disease eye topology") {
    const Model model(fixtures::two_disease_eye());
    const auto m = reduce_model(model, clamp_only(model, {"t_pred"}));
    CHECK(!m.active_subvalues.count("u2"));
    CHECK(m.active_subvalues == std::set<std::string>{"u1", "u3"});
    REQUIRE(m.components.size() == 2);
    CHECK(m.components[0].treatments == std::vector<std::string>{"t_acy"});
    CHECK(m.components[1].treatments == std::vector<std::string>{"t_ara"});

    const auto whole = reduce_model(model, clamp_only(model, {}));
    REQUIRE(whole.components.size() == 2);
    CHECK(whole.components[0].treatments == std::vector<std::string>{"t_acy", "t_pred"});
}

TEST_CASE("reduction of the three-disease breath topology") {
    const Model model(fixtures::three_disease_breath());
    const auto m = reduce_model(model, clamp_only(model, {"t_theo"}));
    REQUIRE(m.components.size() == 2);
    CHECK(m.components[0].treatments == std::vector<std::string>{"t_dig"});
    CHECK(m.components[1].treatments == std::vector<std::string>{"t_ery"});
    CHECK(!m.active_subvalues.count("u3"));
    CHECK(!m.retained_diseases.count("d_asthma"));

    CHECK(reduce_model(model, clamp_only(model, {})).components.size() == 1);
}

TEST_CASE("total pruning gives an empty reduced model") {
    const Model model(fixtures::three_disease_breath());
    const auto m = reduce_model(model, clamp_only(model, {"t_dig", "t_ery", "t_theo"}));
    CHECK(m.active_subvalues.empty());
    CHECK(m.active_treatments.empty());
    CHECK(m.retained_diseases.empty());
    CHECK(m.components.empty());
    const auto rec = solve_reduced(model, m, oracle::FixedJoint(0.5));
    CHECK(rec.op_count == 0);
    for (const auto& [_, c] : rec.treatments) {
        CHECK(!c.decision);
        CHECK(c.source == Source::Pruned);
    }
    CHECK_THROWS_AS(reduce_model(model, {}), InvalidArgument);
}

TEST_CASE("solving reduced components") {
    SUBCASE("single one-treatment component") {
        const Model model(fixtures::single_pair());
        const auto m = reduce_model(model, clamp_only(model, {}));
        const auto rec = solve_reduced(model, m, oracle::FixedJoint(0.3));
        CHECK(rec.treatments.at("t").decision);
        CHECK(rec.treatments.at("t").source == Source::Solved);
        CHECK(rec.treatments.at("t").component == 0);
        CHECK(rec.eu_by_component.at(0) == doctest::Approx(0.915));
        CHECK(rec.op_count == 2);
    }
    SUBCASE("two singleton components cost 2 + 2") {
        const Model model(fixtures::two_disease_eye());
        const auto m = reduce_model(model, clamp_only(model, {"t_pred"}));
        const auto rec = solve_reduced(model, m, QuickscoreJoint(model, Findings::make({"m_red"}, {})));
        CHECK(rec.op_count == 4);
        CHECK(rec.treatments.at("t_pred").source == Source::Pruned);
        check_invariants(model, clamp_only(model, {"t_pred"}), m, rec);
    }
    SUBCASE("component caps report the component") {
        const Model model(fixtures::two_disease_eye());
        const auto m = reduce_model(model, clamp_only(model, {}));
        DecisionOptions opts;
        opts.brute_force_cap = 1;
        try {
            solve_reduced(model, m, QuickscoreJoint(model, Findings{}), opts);
            FAIL("expected CapExceededError");
        } catch (const CapExceededError& e) {
            CHECK(std::string(e.what()).find("component 0") != std::string::npos);
        }
    }
}

TEST_CASE("formulate end to end") {
    SUBCASE("evidence pushes the single disease above threshold") {
        const Model model(fixtures::single_pair(0.1));
        const auto f = formulate(model, Findings::make({"m"}, {}), threshold_table(model));
        CHECK(f.posteriors.point(0) == doctest::Approx(1.0));
        CHECK(f.recommendation.treatments.at("t").decision);
        CHECK(f.recommendation.treatments.at("t").source == Source::Solved);
        CHECK(f.reduced.provenance.kb_hash == model.hash());
        CHECK(f.reduced.provenance.method == "quickscore");
    }
    SUBCASE("rare priors and no evidence prune everything") {
        const Model model(fixtures::two_disease_eye());
        const auto table = threshold_table(model);
        for (const auto& [k, v] : table.entries) {
            const auto d = *model.disease_index(k.second);
            CHECK((!v || model.priors()[d] < *v));
        }
        const auto f = formulate(model, Findings{}, table);
        CHECK(f.recommendation.op_count == 0);
        for (const auto& [_, c] : f.recommendation.treatments) CHECK(c.source == Source::Pruned);
    }
    SUBCASE("tighter bounds only clamp more") {
        Rng rng(77);
        for (int c = 0; c < 30; ++c) {
            GeneratorSpec gs;
            gs.n_diseases = 8;
            gs.n_treatments = 5;
            gs.seed = rng.bits();
            const auto kb = generate_kb(gs);
            const Model model(kb);
            const auto table = threshold_table(model);
            const auto f = random_findings(kb, {}, rng.bits());
            std::set<std::string> prev;
            for (std::uint64_t budget : {1, 4, 16, 256}) {
                Policy p;
                p.method = "bounds";
                p.budget = budget;
                const auto clamped = clamped_set(formulate(model, f, table, p).prune);
                CHECK(std::includes(clamped.begin(), clamped.end(), prev.begin(), prev.end()));
                prev = clamped;
            }
        }
    }
    SUBCASE("monte carlo needs the unsafe flag") {
        const Model model(fixtures::single_pair());
        Policy p;
        p.method = "montecarlo";
        CHECK_THROWS_AS(formulate(model, Findings{}, threshold_table(model), p), InvalidArgument);
        p.allow_unsafe_mc = true;
        CHECK_NOTHROW(formulate(model, Findings{}, threshold_table(model), p));
        p.method = "nonsense";
        CHECK_THROWS_AS(p.check(), InvalidArgument);
    }
}

TEST_CASE("pruning is monotone in the upper bounds") {
    Rng rng(8);
    GeneratorSpec gs;
    gs.n_diseases = 8;
    gs.n_treatments = 6;
    gs.seed = 3;
    const Model model(generate_kb(gs));
    const auto table = threshold_table(model);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> a(8), b(8);
        for (std::size_t j = 0; j < 8; ++j) {
            a[j] = rng.uniform();
            b[j] = a[j] * rng.uniform();
        }
        const auto ca = clamped_set(prune_treatments(model, table, report(model, std::vector<double>(8, 0.0), a)));
        const auto cb = clamped_set(prune_treatments(model, table, report(model, std::vector<double>(8, 0.0), b)));
        CHECK(std::includes(cb.begin(), cb.end(), ca.begin(), ca.end()));
    }
}

TEST_CASE("reduced model invariants over random cases") {
    Rng rng(99);
    for (int c = 0; c < 80; ++c) {
        GeneratorSpec gs;
        gs.n_diseases = 3 + rng.index(8);
        gs.n_treatments = 1 + rng.index(7);
        gs.interaction_prob = 0.3;
        gs.seed = rng.bits();
        const auto kb = generate_kb(gs);
        const Model model(kb);
        const auto f = random_findings(kb, {}, rng.bits());
        const auto out = formulate(model, f, threshold_table(model));
        INFO("case " << c);
        check_invariants(model, out.prune, out.reduced, out.recommendation);
        const auto full = solve_comprehensive(model, f);
        CHECK(out.recommendation.op_count <= full.op_count);
    }
}

TEST_CASE("decomposition is exact for independent components") {
    Rng rng(2718);
    for (int c = 0; c < 40; ++c) {
        GeneratorSpec gs;
        gs.n_diseases = 4 + rng.index(6);
        gs.n_treatments = 1 + rng.index(std::min<std::size_t>(gs.n_diseases, 6));
        gs.exclusive_treatments = true;
        gs.seed = rng.bits();
        const Model model(generate_kb(gs));
        const auto out = formulate(model, Findings{}, threshold_table(model));
        const auto full = solve_comprehensive(model, Findings{});
        for (const auto& t : out.reduced.active_treatments) {
            CHECK(out.recommendation.treatments.at(t).decision == (full.best[*model.treatment_index(t)] != 0));
        }
    }
}

TEST_CASE("json forms carry provenance") {
    const Model model(fixtures::two_disease_eye());
    const auto table = threshold_table(model);
    const auto f = formulate(model, Findings::make({"m_rash"}, {}), table);
    const auto r = reduced_to_json(f.reduced);
    CHECK(r.at("provenance").at("kb_hash") == model.hash());
    CHECK(r.at("provenance").at("thresholds_hash") == sha256_hex(thresholds_to_json(table).dump()));
    CHECK(r.at("provenance").at("findings_hash") == findings_hash(Findings::make({"m_rash"}, {})));
    const auto rec = recommendation_to_json(f.recommendation);
    CHECK(rec.at("treatments").size() == 3);
    const auto pr = prune_to_json(f.prune);
    CHECK(pr.size() == 3);
    CHECK(policy_from_json(policy_to_json(Policy{})).method == "auto");
    CHECK_THROWS_AS(policy_from_json(json{{"method", "psychic"}}), InvalidArgument);
}
