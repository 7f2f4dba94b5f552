#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "dxr/fixtures.hpp"
#include "dxr/http_server.hpp"
#include "dxr/service.hpp"

using namespace dxr;

namespace {

// single pair plus a second leak-free finding of d, so {m absent, m2 present} is impossible
KnowledgeBase forced_kb() {
    auto kb = fixtures::single_pair(0.05);
    kb.manifestations.push_back({"m2", "second finding", 0.0, {{"d", 0.5}}});
    return kb;
}

ConsultService make_service(const KnowledgeBase& kb, ServiceOptions opts = {}) {
    Model model(kb);
    auto table = threshold_table(model);
    return ConsultService(std::move(model), std::move(table), std::move(opts));
}

json without_id(json st) {
    st.erase("session_id");
    st.erase("state_hash");
    return st;
}

int status_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ServiceError& e) {
        return e.status();
    }
    return 0;
}

}  // namespace

TEST_CASE("new sessions start from the priors") {
    auto svc = make_service(fixtures::two_disease_eye());
    const auto a = svc.create_session();
    const auto b = svc.create_session();
    CHECK(a.at("session_id") != b.at("session_id"));
    CHECK(a.at("session_id").get<std::string>().size() == 32);
    CHECK(a.at("posteriors").at("posteriors").at("d_s") == doctest::Approx(0.03));
    CHECK(a.at("posteriors").at("posteriors").at("d_z") == doctest::Approx(0.02));
    CHECK(a.at("provenance").at("kb_hash") == svc.model().hash());
    CHECK(a.at("provenance").at("thresholds_hash") == svc.thresholds_hash());
    CHECK(a.at("state_hash") == state_hash(a));
    CHECK(svc.get_session(a.at("session_id")) == a);
}

TEST_CASE("bad policies and unknown sessions") {
    auto svc = make_service(fixtures::single_pair());
    CHECK(status_of([&] { svc.create_session({{"method", "astrology"}}); }) == 400);
    CHECK(status_of([&] { svc.create_session({{"method", "mc"}}); }) == 400);
    CHECK(status_of([&] { svc.create_session({{"budget", "lots"}}); }) == 400);
    CHECK(status_of([&] { svc.get_session("nope"); }) == 404);
    CHECK(status_of([&] { svc.update_findings("nope", json::object()); }) == 404);
    const auto s = svc.create_session({{"method", "mc"}, {"allow_unsafe_mc", true}, {"samples", 1000}});
    CHECK(s.at("posteriors").at("method") == "mc");
}

TEST_CASE("forced posterior activates the treatment") {
    auto svc = make_service(forced_kb());
    const auto id = svc.create_session().at("session_id").get<std::string>();
    const auto fresh = svc.get_session(id);
    CHECK(fresh.at("recommendation").at("treatments").at("t").at("source") == "PRUNED");
    const auto st = svc.update_findings(id, {{"set_present", {"m"}}});
    CHECK(st.at("posteriors").at("posteriors").at("d") == doctest::Approx(1.0));
    CHECK(st.at("prune")[0].at("status") == "ACTIVE");
    CHECK(st.at("recommendation").at("treatments").at("t").at("decision") == true);
    CHECK(st.at("reduced_model").at("components").size() == 1);

    SUBCASE("clear all returns to a fresh state") {
        const auto cleared = svc.update_findings(id, {{"clear", "all"}});
        CHECK(cleared.at("state_hash") == fresh.at("state_hash"));
        const auto other = svc.create_session();
        CHECK(without_id(cleared) == without_id(other));
    }
    SUBCASE("add then remove restores the hash") {
        const auto before = svc.get_session(id);
        svc.update_findings(id, {{"set_absent", {"m2"}}});
        const auto after = svc.update_findings(id, {{"clear", {"m2"}}});
        CHECK(after.at("state_hash") == before.at("state_hash"));
        CHECK(after.dump() == before.dump());
    }
    SUBCASE("a finding moves between sets") {
        const auto moved = svc.update_findings(id, {{"set_absent", {"m"}}});
        CHECK(moved.at("findings").at("present").empty());
        CHECK(moved.at("findings").at("absent") == json::array({"m"}));
    }
}

TEST_CASE("rejected deltas leave the session unchanged") {
    auto svc = make_service(forced_kb());
    const auto id = svc.create_session().at("session_id").get<std::string>();
    svc.update_findings(id, {{"set_absent", {"m"}}});
    const auto before = svc.get_session(id);
    const auto log_size = svc.request_log(id).size();

    CHECK(status_of([&] { svc.update_findings(id, {{"set_present", {"m2"}}}); }) == 422);
    CHECK(status_of([&] { svc.update_findings(id, {{"set_present", {"m2"}}, {"set_absent", {"m2"}}}); }) == 409);
    CHECK(status_of([&] { svc.update_findings(id, {{"set_present", {"zz"}}}); }) == 400);
    CHECK(status_of([&] { svc.update_findings(id, {{"add", {"m"}}}); }) == 400);
    CHECK(status_of([&] { svc.update_findings(id, json::array()); }) == 400);

    CHECK(svc.get_session(id) == before);
    CHECK(svc.request_log(id).size() == log_size);
}

TEST_CASE("what-if queries") {
    auto svc = make_service(fixtures::two_disease_eye());
    const auto id = svc.create_session().at("session_id").get<std::string>();
    const auto st = svc.update_findings(id, {{"set_present", {"m_red"}}});
    const auto hash = st.at("state_hash");
    const auto rec = st.at("recommendation").at("treatments");
    CHECK(rec.at("t_pred").at("source") == "PRUNED");

    const auto same = svc.what_if(id, json::object());
    CHECK(same.at("delta_vs_recommended") == 0.0);
    CHECK(same.at("eu") == same.at("recommended_eu"));

    for (const auto& [tid, c] : rec.items()) {
        if (!c.at("decision").get<bool>()) continue;
        const auto flipped = svc.what_if(id, {{tid, false}});
        CHECK(flipped.at("delta_vs_recommended").get<double>() <= 0.0);
        CHECK(flipped.at("assignment").at(tid) == false);
    }
    const auto pruned = svc.what_if(id, {{"t_pred", true}});
    CHECK(pruned.at("eu").get<double>() > 0.0);
    CHECK(pruned.at("eu").get<double>() <= 1.0);
    CHECK(pruned.at("state_hash") == hash);

    CHECK(status_of([&] { svc.what_if(id, {{"t_zz", true}}); }) == 400);
    CHECK(status_of([&] { svc.what_if(id, {{"t_pred", 1}}); }) == 400);
    CHECK(svc.get_session(id).at("state_hash") == hash);
}

TEST_CASE("request logs replay to the same state") {
    const auto dir = std::filesystem::temp_directory_path() / "dxr_test_service_logs";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    ServiceOptions opts;
    opts.log_dir = dir;
    auto svc = make_service(fixtures::two_disease_eye(), opts);
    const auto id = svc.create_session({{"method", "bounds"}, {"budget", 2}}).at("session_id").get<std::string>();
    svc.update_findings(id, {{"set_present", {"m_red"}}});
    svc.update_findings(id, {{"set_absent", {"m_rash"}}});
    svc.what_if(id, {{"t_acy", true}});
    const auto last = svc.update_findings(id, {{"set_present", {"m_rash"}}});

    const auto log = svc.request_log(id);
    CHECK(log.size() == 4);
    CHECK(svc.replay(log).dump() == last.dump());

    std::vector<json> from_disk;
    std::ifstream in(dir / (id + ".ndjson"));
    for (std::string line; std::getline(in, line);) from_disk.push_back(json::parse(line));
    CHECK(from_disk == log);
    CHECK(svc.replay(from_disk).dump() == last.dump());
    CHECK(status_of([&] { svc.replay({}); }) == 400);
}

TEST_CASE("sessions are independent under concurrent updates") {
    auto svc = make_service(fixtures::two_disease_eye());
    std::vector<std::string> ids;
    for (int i = 0; i < 8; ++i) ids.push_back(svc.create_session().at("session_id"));
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&, i] {
            for (int k = 0; k < 10; ++k) {
                svc.update_findings(ids[i], {{k % 2 ? "set_absent" : "set_present", {"m_red"}}});
                svc.what_if(ids[i], {{"t_acy", true}});
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& id : ids) CHECK(svc.get_session(id).at("findings").at("absent") == json::array({"m_red"}));
}

TEST_CASE("http endpoints") {
    auto svc = make_service(fixtures::two_disease_eye());
    HttpServer server(svc, {"127.0.0.1", 0, "http://ui.example"});
    const int port = server.start();
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://ui.example");

    auto stats = cli.Get("/kb/stats");
    REQUIRE(stats);
    CHECK(json::parse(stats->body).at("n_diseases") == 2);
    auto th = cli.Get("/kb/thresholds");
    REQUIRE(th);
    CHECK(json::parse(th->body).at("thresholds").size() == 3);

    auto created = cli.Post("/sessions", R"({"method":"quickscore"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto id = json::parse(created->body).at("session_id").get<std::string>();

    auto upd = cli.Post("/sessions/" + id + "/findings", R"({"set_present":["m_red"]})", "application/json");
    REQUIRE(upd);
    CHECK(upd->status == 200);
    const auto st = json::parse(upd->body);

    auto got = cli.Get("/sessions/" + id);
    REQUIRE(got);
    CHECK(json::parse(got->body) == st);

    auto wi = cli.Post("/sessions/" + id + "/whatif", R"({"assignment":{"t_pred":true}})", "application/json");
    REQUIRE(wi);
    CHECK(wi->status == 200);
    CHECK(json::parse(wi->body).at("state_hash") == st.at("state_hash"));

    auto bad = cli.Post("/sessions/" + id + "/findings", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body).contains("code"));

    auto missing = cli.Get("/sessions/deadbeef");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).at("code").is_string());

    auto nowhere = cli.Get("/no/such/route");
    REQUIRE(nowhere);
    CHECK(nowhere->status == 404);

    auto pre = cli.Options("/sessions");
    REQUIRE(pre);
    CHECK(pre->status == 204);
    CHECK(!pre->get_header_value("Access-Control-Allow-Methods").empty());

    server.stop();
}
