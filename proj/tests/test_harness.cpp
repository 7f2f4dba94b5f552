#include <doctest.h>

#include "dxr/fixtures.hpp"
#include "dxr/harness.hpp"
#include "oracles.hpp"

using namespace dxr;

namespace {

SoundnessSpec small_spec(std::size_t n, std::uint64_t seed) {
    SoundnessSpec s;
    s.n_cases = n;
    s.seed = seed;
    s.kb_spec.n_diseases = 8;
    s.kb_spec.n_manifestations = 10;
    s.kb_spec.n_treatments = 5;
    return s;
}

bool clamped_false(const Formulation& f, const std::string& t) {
    for (const auto& p : f.prune) {
        if (p.treatment == t) return p.status == PruneStatus::ClampedFalse;
    }
    throw InvalidArgument("no treatment " + t);
}

}  // namespace

TEST_CASE("empty experiment") {
    const auto r = run_soundness_experiment(small_spec(0, 1));
    CHECK(r.n_cases == 0);
    CHECK(r.n_agreements == 0);
    CHECK(r.cases.empty());
    CHECK(r.disagreements().empty());
}

TEST_CASE("spec caps") {
    auto s = small_spec(1, 1);
    s.kb_spec.n_diseases = 13;
    CHECK_THROWS_AS(run_soundness_experiment(s), InvalidArgument);
    s.kb_spec.n_diseases = 8;
    s.kb_spec.n_treatments = 9;
    CHECK_THROWS_AS(run_soundness_experiment(s), InvalidArgument);
}

TEST_CASE("exclusive treatments with empty findings always agree") {
    auto s = small_spec(60, 11);
    s.kb_spec.exclusive_treatments = true;
    s.findings_density = {0.0, 0.0, 1.0};
    const auto r = run_soundness_experiment(s);
    CHECK(r.n_skipped == 0);
    CHECK(r.n_agreements == 60);
    CHECK(r.agreement_rate() == 1.0);
}

TEST_CASE("experiment is deterministic and replayable") {
    const auto s = small_spec(40, 7);
    const auto a = run_soundness_experiment(s);
    const auto b = run_soundness_experiment(s);
    CHECK(soundness_to_json(a, s).dump() == soundness_to_json(b, s).dump());
    for (const auto& c : a.cases) {
        const auto again = run_case(s, c.index);
        CHECK(again.agree == c.agree);
        CHECK(again.differing == c.differing);
        CHECK(c.op_count_reduced <= c.op_count_comprehensive);
        CHECK(c.nodes_after <= c.nodes_before);
    }
    for (const auto* d : a.disagreements()) {
        CHECK(!run_case(s, d->index).agree);
        CHECK(!d->differing.empty());
    }
    CHECK(a.n_agreements + a.n_skipped <= a.n_cases);
}

TEST_CASE("constructed unsound case") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto c = find_unsound_case(seed);
        const Model model(c.kb);
        INFO("seed " << seed);
        CHECK(c.comprehensive_best.at(c.treatment));
        CHECK(!c.reduced_best.at(c.treatment));

        const auto table = threshold_table(model);
        const auto replay = formulate(model, c.findings, table);
        CHECK(!replay.recommendation.treatments.at(c.treatment).decision);
        CHECK(named_assignment(model, solve_comprehensive(model, c.findings).best) == c.comprehensive_best);
        for (const auto& d : c.diseases) {
            const auto j = replay.posteriors.index_of(d);
            CHECK(replay.posteriors.upper[*j] < *table.at(c.treatment, d));
        }

        // Independent check of the comprehensive side.
        CHECK(oracle::best_assignment(c.kb, c.findings).assignment == c.comprehensive_best);

        for (const auto& d : c.diseases) {
            const auto f = strengthened_findings(c, d);
            const auto out = formulate(model, f, table);
            const auto full = named_assignment(model, solve_comprehensive(model, f).best);
            CHECK(clamped_false(out, c.treatment) == false);
            CHECK(named_assignment(model, recommended_assignment(model, out.recommendation)) == full);
        }

        auto harmless = c.kb;
        for (auto& sv : harmless.subvalues) {
            for (auto& [k, v] : sv.table) {
                if (k.front() == '0') v = 1.0;
            }
        }
        const Model hm(harmless);
        const auto ht = threshold_table(hm);
        for (const auto& d : c.diseases) CHECK(ht.at(c.treatment, d) == 0.0);
        const auto out = formulate(hm, c.findings, ht);
        CHECK(out.prune[0].status == PruneStatus::Active);
        CHECK(recommended_assignment(hm, out.recommendation) == solve_comprehensive(hm, c.findings).best);
    }
    CHECK(unsound_to_json(find_unsound_case(4)).at("treatment") == "a");
}

TEST_CASE("cost report") {
    const Model eye(fixtures::two_disease_eye());
    const auto c = cost_report(eye, Findings{});
    CHECK(c.op_count_comprehensive == 8);
    CHECK(c.op_count_reduced == 0);
    CHECK(c.nodes_before == 2 + 3 + 3);
    CHECK(c.nodes_after == 0);

    // Only the steroid pruned: 2 + 2 against 2^3.
    const auto f = Findings::make({"m_red"}, {});
    const auto table = threshold_table(eye);
    const auto out = formulate(eye, f, table);
    REQUIRE(clamped_false(out, "t_pred"));
    REQUIRE(!clamped_false(out, "t_acy"));
    REQUIRE(!clamped_false(out, "t_ara"));
    const auto c2 = cost_report(eye, f);
    CHECK(c2.op_count_comprehensive == 8);
    CHECK(c2.op_count_reduced == 4);
    CHECK(cost_to_json(c2).at("op_count_reduced") == 4);
}
