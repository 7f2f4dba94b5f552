#pragma once
// Consult sessions: incremental findings, re-formulation on every change,
// what-if expected utilities. Transport independent; see http_server.hpp.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dxr/decision.hpp"
#include "dxr/formulation.hpp"
#include "dxr/kb.hpp"
#include "dxr/kb_io.hpp"

namespace dxr {

/// Error surfaced to clients as {code, message, detail} with an HTTP status.
class ServiceError : public Error {
public:
    ServiceError(int status, std::string code, const std::string& message, json detail = nullptr)
        : Error(message), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }
    const json& detail() const { return detail_; }
    json body() const { return {{"code", code_}, {"message", what()}, {"detail", detail_}}; }

private:
    int status_;
    std::string code_;
    json detail_;
};

/// Maps any exception thrown by the library to a ServiceError.
ServiceError to_service_error(const std::exception& e);

struct ServiceOptions {
    std::optional<std::filesystem::path> log_dir;   // one NDJSON request log per session
    DecisionOptions decision{};
};

class ConsultService {
public:
    ConsultService(Model model, ThresholdTable thresholds, ServiceOptions opts = {});

    // All of these throw ServiceError.
    json create_session(const json& policy = json::object());
    json get_session(const std::string& id) const;
    /// delta: {"set_present": [...], "set_absent": [...], "clear": [...] | "all"}
    json update_findings(const std::string& id, const json& delta);
    /// assignment: {"treatment": bool, ...}; unlisted treatments take recommended values.
    json what_if(const std::string& id, const json& assignment) const;

    json kb_stats() const;
    json thresholds() const;
    json health() const;

    /// Request log events of a session, in order.
    std::vector<json> request_log(const std::string& id) const;
    /// Rebuilds a session from its log without registering it; returns its state.
    json replay(const std::vector<json>& events) const;

    const Model& model() const { return model_; }
    std::string thresholds_hash() const { return thresholds_hash_; }

private:
    struct Session {
        std::string id;
        Policy policy;
        Findings findings;
        Formulation formulation;
        std::vector<json> log;
        mutable std::mutex mu;
    };

    std::shared_ptr<Session> find(const std::string& id) const;
    Formulation formulate_for(const Policy& policy, const Findings& findings) const;
    Findings apply_delta(const Findings& current, const json& delta) const;
    json state(const Session& s) const;
    json with_hash(json state) const;
    void record(Session& s, json event);

    Model model_;
    ThresholdTable thresholds_;
    std::string thresholds_hash_;
    ServiceOptions opts_;
    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// SHA-256 of the compact state JSON with any "state_hash" member removed.
std::string state_hash(const json& state);

/// 128 random bits, hex encoded.
std::string new_session_id();

}  // namespace dxr
