#include "dxr/service.hpp"

#include <openssl/rand.h>

#include <cstdio>
#include <fstream>

#include "dxr/harness.hpp"

namespace dxr {

ServiceError to_service_error(const std::exception& e) {
    if (auto* s = dynamic_cast<const ServiceError*>(&e)) return *s;
    if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
        json detail = json::array();
        for (const auto& x : v->violations()) detail.push_back({{"node", x.node}, {"rule", x.rule}, {"detail", x.detail}});
        return {400, "validation_failed", e.what(), detail};
    }
    if (dynamic_cast<const ParseError*>(&e)) return {400, "parse_error", e.what()};
    if (dynamic_cast<const InvalidArgument*>(&e)) return {400, "invalid_argument", e.what()};
    if (dynamic_cast<const ZeroLikelihoodError*>(&e)) return {422, "zero_likelihood", e.what()};
    if (dynamic_cast<const CapExceededError*>(&e)) return {422, "cap_exceeded", e.what()};
    if (dynamic_cast<const StaleThresholdsError*>(&e)) return {409, "stale_thresholds", e.what()};
    if (dynamic_cast<const json::exception*>(&e)) return {400, "bad_request", e.what()};
    return {500, "internal", e.what()};
}

std::string state_hash(const json& state) {
    json copy = state;
    if (copy.is_object()) copy.erase("state_hash");
    return sha256_hex(copy.dump());
}

std::string new_session_id() {
    unsigned char buf[16];
    if (RAND_bytes(buf, sizeof buf) != 1) throw Error("random source unavailable");
    std::string out;
    char hex[3];
    for (unsigned char c : buf) {
        std::snprintf(hex, sizeof hex, "%02x", c);
        out += hex;
    }
    return out;
}

ConsultService::ConsultService(Model model, ThresholdTable thresholds, ServiceOptions opts)
    : model_(std::move(model)), thresholds_(std::move(thresholds)), opts_(std::move(opts)) {
    if (thresholds_.kb_hash != model_.hash()) {
        throw StaleThresholdsError("threshold table was computed for a different knowledge base");
    }
    thresholds_hash_ = sha256_hex(thresholds_to_json(thresholds_).dump());
    if (opts_.log_dir) std::filesystem::create_directories(*opts_.log_dir);
}

std::shared_ptr<ConsultService::Session> ConsultService::find(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown_session", "no session with id '" + id + "'");
    return it->second;
}

Formulation ConsultService::formulate_for(const Policy& policy, const Findings& findings) const {
    try {
        return formulate(model_, findings, thresholds_, policy, opts_.decision);
    } catch (const std::exception& e) {
        throw to_service_error(e);
    }
}

json ConsultService::state(const Session& s) const {
    const auto& f = s.formulation;
    return {{"session_id", s.id},
            {"policy", policy_to_json(s.policy)},
            {"findings", findings_to_json(s.findings)},
            {"posteriors", report_to_json(f.posteriors)},
            {"prune", prune_to_json(f.prune)},
            {"reduced_model", reduced_to_json(f.reduced)},
            {"recommendation", recommendation_to_json(f.recommendation)},
            {"provenance",
             {{"kb_hash", model_.hash()}, {"thresholds_hash", thresholds_hash_},
              {"method", f.reduced.provenance.method}, {"budget", f.reduced.provenance.budget}}}};
}

json ConsultService::with_hash(json st) const {
    st["state_hash"] = state_hash(st);
    return st;
}

void ConsultService::record(Session& s, json event) {
    event["seq"] = s.log.size();
    if (opts_.log_dir) {
        std::ofstream out(*opts_.log_dir / (s.id + ".ndjson"), std::ios::app);
        out << event.dump() << '\n';
    }
    s.log.push_back(std::move(event));
}

json ConsultService::create_session(const json& policy_json) {
    Policy policy;
    try {
        policy = policy_from_json(policy_json.is_null() ? json::object() : policy_json);
    } catch (const std::exception& e) {
        throw to_service_error(e);
    }
    auto s = std::make_shared<Session>();
    s->id = new_session_id();
    s->policy = policy;
    s->formulation = formulate_for(policy, s->findings);
    record(*s, {{"op", "create"}, {"session_id", s->id}, {"policy", policy_to_json(policy)}});
    json out = with_hash(state(*s));
    std::unique_lock lock(sessions_mu_);
    sessions_[s->id] = std::move(s);
    return out;
}

json ConsultService::get_session(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return with_hash(state(*s));
}

Findings ConsultService::apply_delta(const Findings& current, const json& delta) const {
    if (!delta.is_object()) throw ServiceError(400, "bad_request", "findings delta must be a JSON object");
    for (const auto& [key, _] : delta.items()) {
        if (key != "set_present" && key != "set_absent" && key != "clear") {
            throw ServiceError(400, "bad_request", "unknown delta field '" + key + "'");
        }
    }
    auto ids = [&](const char* key) {
        std::set<std::string> out;
        if (!delta.contains(key)) return out;
        const auto& v = delta.at(key);
        if (!v.is_array()) throw ServiceError(400, "bad_request", std::string(key) + " must be an array of ids");
        for (const auto& x : v) {
            if (!x.is_string()) throw ServiceError(400, "bad_request", std::string(key) + " must be an array of ids");
            const auto id = x.get<std::string>();
            if (!model_.manifestation_index(id)) {
                throw ServiceError(400, "unknown_manifestation", "unknown manifestation '" + id + "'", id);
            }
            out.insert(id);
        }
        return out;
    };
    const auto present = ids("set_present");
    const auto absent = ids("set_absent");
    json both = json::array();
    for (const auto& id : present) {
        if (absent.count(id)) both.push_back(id);
    }
    if (!both.empty()) throw ServiceError(409, "conflicting_delta", "manifestations listed as both present and absent", both);

    Findings f = current;
    if (delta.contains("clear")) {
        const auto& c = delta.at("clear");
        if (c == "all" || c == true) {
            f = Findings{};
        } else {
            for (const auto& id : ids("clear")) {
                f.present.erase(id);
                f.absent.erase(id);
            }
        }
    }
    for (const auto& id : present) {
        f.absent.erase(id);
        f.present.insert(id);
    }
    for (const auto& id : absent) {
        f.present.erase(id);
        f.absent.insert(id);
    }
    return f;
}

json ConsultService::update_findings(const std::string& id, const json& delta) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    Findings next = apply_delta(s->findings, delta);
    // Nothing is committed unless the new findings formulate cleanly.
    Formulation f = formulate_for(s->policy, next);
    s->findings = std::move(next);
    s->formulation = std::move(f);
    record(*s, {{"op", "findings"}, {"delta", delta}});
    return with_hash(state(*s));
}

json ConsultService::what_if(const std::string& id, const json& assignment) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    if (!assignment.is_object()) throw ServiceError(400, "bad_request", "what-if assignment must be a JSON object");
    try {
        const Assignment recommended = recommended_assignment(model_, s->formulation.recommendation);
        Assignment a = recommended;
        for (const auto& [tid, v] : assignment.items()) {
            auto i = model_.treatment_index(tid);
            if (!i) throw ServiceError(400, "unknown_treatment", "unknown treatment '" + tid + "'", tid);
            if (!v.is_boolean()) throw ServiceError(400, "bad_request", "what-if values must be booleans");
            a[*i] = v.get<bool>();
        }
        const auto& opts = opts_.decision.inference;
        std::unique_ptr<JointEngine> engine;
        if (s->findings.present.size() <= opts.quickscore_cap) {
            engine = std::make_unique<QuickscoreJoint>(model_, s->findings, opts);
        } else {
            engine = std::make_unique<EnumerationJoint>(model_, s->findings, opts);
        }
        std::vector<std::size_t> all(model_.n_subvalues());
        for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
        const UtilityEvaluator evaluate(model_, all, *engine);
        const double eu = evaluate(a);
        const double eu_rec = evaluate(recommended);
        return {{"assignment", named_assignment(model_, a)},
                {"eu", eu},
                {"recommended_eu", eu_rec},
                {"delta_vs_recommended", eu - eu_rec},
                {"state_hash", state_hash(state(*s))}};
    } catch (const ServiceError&) {
        throw;
    } catch (const std::exception& e) {
        throw to_service_error(e);
    }
}

json ConsultService::kb_stats() const {
    const auto st = dxr::kb_stats(model_.kb());
    return {{"n_diseases", st.n_diseases},   {"n_manifestations", st.n_manifestations},
            {"n_arcs", st.n_arcs},           {"n_treatments", st.n_treatments},
            {"n_subvalues", st.n_subvalues}, {"kb_hash", model_.hash()}};
}

json ConsultService::thresholds() const {
    json out = thresholds_to_json(thresholds_);
    out["thresholds_hash"] = thresholds_hash_;
    return out;
}

json ConsultService::health() const {
    std::shared_lock lock(sessions_mu_);
    return {{"status", "ok"}, {"kb_hash", model_.hash()}, {"sessions", sessions_.size()}};
}

std::vector<json> ConsultService::request_log(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return s->log;
}

json ConsultService::replay(const std::vector<json>& events) const {
    if (events.empty() || events.front().value("op", "") != "create") {
        throw ServiceError(400, "bad_log", "request log must start with a create event");
    }
    Session s;
    try {
        s.id = events.front().at("session_id").get<std::string>();
        s.policy = policy_from_json(events.front().at("policy"));
    } catch (const ServiceError&) {
        throw;
    } catch (const std::exception& e) {
        throw to_service_error(e);
    }
    s.formulation = formulate_for(s.policy, s.findings);
    for (std::size_t i = 1; i < events.size(); ++i) {
        const auto& ev = events[i];
        if (ev.value("op", "") != "findings") throw ServiceError(400, "bad_log", "unexpected event in request log");
        s.findings = apply_delta(s.findings, ev.at("delta"));
        s.formulation = formulate_for(s.policy, s.findings);
    }
    return with_hash(state(s));
}

}  // namespace dxr
