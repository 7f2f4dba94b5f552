// Command-line front end. Exit codes: 0 ok, 1 validation or domain failure,
// 2 usage error.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <optional>

#include "dxr/decision.hpp"
#include "dxr/formulation.hpp"
#include "dxr/generate.hpp"
#include "dxr/harness.hpp"
#include "dxr/http_server.hpp"
#include "dxr/inference.hpp"
#include "dxr/kb_io.hpp"
#include "dxr/service.hpp"

using namespace dxr;

namespace {

void emit(const json& j, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        write_text_file(out, j.dump(2) + "\n");
    }
}

json violations_json(const std::vector<Violation>& vs) {
    json out = json::array();
    for (const auto& v : vs) out.push_back({{"node", v.node}, {"rule", v.rule}, {"detail", v.detail}});
    return out;
}

Findings findings_or_empty(const std::string& path) { return path.empty() ? Findings{} : load_findings(path); }

HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy-OR diagnosis and patient-specific treatment decision models"};
    app.require_subcommand(1);
    std::function<int()> action;

    // validate
    std::string v_kb, v_findings;
    auto* validate = app.add_subcommand("validate", "Check a knowledge base (and optionally findings)");
    validate->add_option("kb", v_kb, "Knowledge base JSON")->required();
    validate->add_option("--findings", v_findings, "Findings JSON to check against the KB");
    validate->callback([&] {
        action = [&] {
            const auto kb = kb_from_json(parse_json_text(read_text_file(v_kb), v_kb));
            auto violations = validate_kb(kb);
            if (!violations.empty()) {
                emit({{"valid", false}, {"violations", violations_json(violations)}}, "");
                return 1;
            }
            json out = {{"valid", true}, {"kb_hash", kb_hash(kb)}};
            const auto st = kb_stats(kb);
            out["stats"] = {{"n_diseases", st.n_diseases}, {"n_manifestations", st.n_manifestations}, {"n_arcs", st.n_arcs},
                            {"n_treatments", st.n_treatments}, {"n_subvalues", st.n_subvalues}};
            if (!v_findings.empty()) {
                const auto f = findings_from_json(parse_json_text(read_text_file(v_findings), v_findings));
                auto fv = validate_findings(kb, f);
                if (!fv.empty()) {
                    emit({{"valid", false}, {"violations", violations_json(fv)}}, "");
                    return 1;
                }
                out["findings_hash"] = findings_hash(f);
            }
            emit(out, "");
            return 0;
        };
    });

    // generate
    GeneratorSpec gs;
    std::string g_out;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic knowledge base");
    generate->add_option("--diseases", gs.n_diseases)->capture_default_str();
    generate->add_option("--manifestations", gs.n_manifestations)->capture_default_str();
    generate->add_option("--treatments", gs.n_treatments)->capture_default_str();
    generate->add_option("--links", gs.links_per_manifestation, "Links per manifestation")->capture_default_str();
    generate->add_flag("--exclusive", gs.exclusive_treatments, "One treatment per disease, no interactions");
    generate->add_option("--seed", gs.seed)->capture_default_str();
    generate->add_option("-o,--output", g_out, "Output path (stdout if omitted)");
    generate->callback([&] {
        action = [&] {
            const auto kb = generate_kb(gs);
            if (g_out.empty()) {
                std::cout << dump_kb(kb) << '\n';
            } else {
                save_kb(kb, g_out);
            }
            return 0;
        };
    });

    // infer
    std::string i_kb, i_findings, i_method = "quickscore", i_out;
    std::uint64_t i_budget = 4096, i_seed = 0;
    std::size_t i_samples = 10000;
    auto* infer_cmd = app.add_subcommand("infer", "Posterior disease probabilities");
    infer_cmd->add_option("--kb", i_kb)->required();
    infer_cmd->add_option("--findings", i_findings);
    infer_cmd->add_option("--method", i_method)
        ->check(CLI::IsMember({"quickscore", "oracle", "bounds", "mc", "montecarlo"}))
        ->capture_default_str();
    infer_cmd->add_option("--budget", i_budget, "States enumerated by the bounds method")->capture_default_str();
    infer_cmd->add_option("--samples", i_samples)->capture_default_str();
    infer_cmd->add_option("--seed", i_seed)->capture_default_str();
    infer_cmd->add_option("-o,--output", i_out);
    infer_cmd->callback([&] {
        action = [&] {
            const Model model(load_kb(i_kb));
            const auto findings = findings_or_empty(i_findings);
            PosteriorReport r;
            switch (*parse_method(i_method)) {
                case Method::Oracle: r = oracle_posteriors(model, findings); break;
                case Method::Quickscore: r = quickscore_posteriors(model, findings); break;
                case Method::Bounds: r = bounded_posteriors(model, findings, i_budget); break;
                case Method::MonteCarlo: r = mc_posteriors(model, findings, {i_samples, i_seed}); break;
            }
            json out = report_to_json(r);
            out["kb_hash"] = model.hash();
            out["findings_hash"] = findings_hash(findings);
            emit(out, i_out);
            return 0;
        };
    });

    // thresholds
    std::string t_kb, t_out;
    auto* thresholds = app.add_subcommand("thresholds", "Treatment threshold table");
    thresholds->add_option("--kb", t_kb)->required();
    thresholds->add_option("-o,--output", t_out);
    thresholds->callback([&] {
        action = [&] {
            const Model model(load_kb(t_kb));
            emit(thresholds_to_json(threshold_table(model)), t_out);
            return 0;
        };
    });

    // formulate
    std::string f_kb, f_findings, f_thresholds, f_out;
    Policy policy;
    bool f_compare = false;
    auto* formulate_cmd = app.add_subcommand("formulate", "Build and solve the patient-specific model");
    formulate_cmd->add_option("--kb", f_kb)->required();
    formulate_cmd->add_option("--findings", f_findings);
    formulate_cmd->add_option("--thresholds", f_thresholds, "Threshold table (computed if omitted)");
    formulate_cmd->add_option("--method", policy.method)
        ->check(CLI::IsMember({"auto", "quickscore", "oracle", "bounds", "mc", "montecarlo"}))
        ->capture_default_str();
    formulate_cmd->add_option("--budget", policy.budget)->capture_default_str();
    formulate_cmd->add_option("--samples", policy.samples)->capture_default_str();
    formulate_cmd->add_option("--seed", policy.seed)->capture_default_str();
    formulate_cmd->add_flag("--allow-unsafe-mc", policy.allow_unsafe_mc, "Prune on Monte Carlo point estimates");
    formulate_cmd->add_flag("--compare", f_compare, "Also solve the comprehensive model and report any disagreement");
    formulate_cmd->add_option("-o,--output", f_out);
    formulate_cmd->callback([&] {
        action = [&] {
            const Model model(load_kb(f_kb));
            const auto findings = findings_or_empty(f_findings);
            const auto table = f_thresholds.empty()
                                   ? threshold_table(model)
                                   : thresholds_from_json(parse_json_text(read_text_file(f_thresholds), f_thresholds));
            const auto f = formulate(model, findings, table, policy);
            json out = {{"posteriors", report_to_json(f.posteriors)},
                        {"prune", prune_to_json(f.prune)},
                        {"reduced_model", reduced_to_json(f.reduced)},
                        {"recommendation", recommendation_to_json(f.recommendation)}};
            if (f_compare) {
                const auto full = solve_comprehensive(model, findings);
                const auto reduced = named_assignment(model, recommended_assignment(model, f.recommendation));
                const auto comprehensive = named_assignment(model, full.best);
                json differing = json::array();
                for (const auto& [id, on] : comprehensive) {
                    if (reduced.at(id) != on) differing.push_back(id);
                }
                out["comparison"] = {{"comprehensive_best", comprehensive}, {"comprehensive_eu", full.eu},
                                     {"op_count_comprehensive", full.op_count}, {"agree", differing.empty()},
                                     {"differing", differing}};
            }
            emit(out, f_out);
            return 0;
        };
    });

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Soundness and cost experiments");
    experiment->require_subcommand(1);
    SoundnessSpec ss;
    std::string s_out;
    auto* soundness = experiment->add_subcommand("soundness", "Reduced vs comprehensive decisions on random cases");
    soundness->add_option("--cases", ss.n_cases)->capture_default_str();
    soundness->add_option("--seed", ss.seed)->capture_default_str();
    soundness->add_option("--diseases", ss.kb_spec.n_diseases)->capture_default_str();
    soundness->add_option("--manifestations", ss.kb_spec.n_manifestations)->capture_default_str();
    soundness->add_option("--treatments", ss.kb_spec.n_treatments)->capture_default_str();
    soundness->add_option("--method", ss.policy.method)
        ->check(CLI::IsMember({"auto", "quickscore", "oracle", "bounds"}))
        ->capture_default_str();
    soundness->add_option("--budget", ss.policy.budget)->capture_default_str();
    soundness->add_option("-o,--output", s_out);
    soundness->callback([&] {
        action = [&] {
            const auto r = run_soundness_experiment(ss);
            emit(soundness_to_json(r, ss), s_out);
            std::cerr << "agreement " << r.n_agreements << "/" << (r.n_cases - r.n_skipped) << ", mean op count "
                      << r.mean_op_count_reduced << " reduced vs " << r.mean_op_count_comprehensive << " comprehensive\n";
            return 0;
        };
    });
    std::uint64_t u_seed = 0;
    std::string u_out;
    auto* unsound = experiment->add_subcommand("unsound", "Construct a verified reduced/comprehensive disagreement");
    unsound->add_option("--seed", u_seed)->capture_default_str();
    unsound->add_option("-o,--output", u_out);
    unsound->callback([&] {
        action = [&] {
            emit(unsound_to_json(find_unsound_case(u_seed)), u_out);
            return 0;
        };
    });
    std::string c_kb, c_findings;
    Policy c_policy;
    auto* cost = experiment->add_subcommand("cost", "Op counts and node counts for one case");
    cost->add_option("--kb", c_kb)->required();
    cost->add_option("--findings", c_findings);
    cost->add_option("--method", c_policy.method)
        ->check(CLI::IsMember({"auto", "quickscore", "oracle", "bounds"}))
        ->capture_default_str();
    cost->callback([&] {
        action = [&] {
            const Model model(load_kb(c_kb));
            emit(cost_to_json(cost_report(model, findings_or_empty(c_findings), c_policy)), "");
            return 0;
        };
    });

    // serve
    HttpOptions http;
    std::string sv_kb, sv_thresholds, sv_logs;
    auto* serve = app.add_subcommand("serve", "Run the consult HTTP service");
    serve->add_option("--kb", sv_kb)->required();
    serve->add_option("--thresholds", sv_thresholds, "Threshold table (computed if omitted)");
    serve->add_option("--port", http.port)->capture_default_str();
    serve->add_option("--host", http.host)->capture_default_str();
    serve->add_option("--cors-origin", http.cors_origin)->capture_default_str();
    serve->add_option("--log-dir", sv_logs, "Directory for per-session request logs");
    serve->callback([&] {
        action = [&] {
            Model model(load_kb(sv_kb));
            auto table = sv_thresholds.empty()
                             ? threshold_table(model)
                             : thresholds_from_json(parse_json_text(read_text_file(sv_thresholds), sv_thresholds));
            ServiceOptions opts;
            if (!sv_logs.empty()) opts.log_dir = sv_logs;
            ConsultService service(std::move(model), std::move(table), opts);
            HttpServer server(service, http);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << http.host << ":" << http.port << '\n';
            server.run();
            g_server = nullptr;
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return action ? action() : 2;
    } catch (const ValidationError& e) {
        emit({{"valid", false}, {"error", e.what()}, {"violations", violations_json(e.violations())}}, "");
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
