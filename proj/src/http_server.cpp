#include "dxr/http_server.hpp"

#include <httplib.h>

namespace dxr {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, "parse_error", "request body is not valid JSON", e.what());
    }
}

template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const std::exception& e) {
            const auto err = to_service_error(e);
            send_json(res, err.status(), err.body());
        }
    };
}

}  // namespace

HttpServer::HttpServer(ConsultService& service, HttpOptions opts)
    : service_(service), opts_(std::move(opts)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
    auto& s = *server_;
    const std::string origin = opts_.cors_origin;
    s.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    });
    s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, service_.health());
    }));
    s.Get("/kb/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, service_.kb_stats());
    }));
    s.Get("/kb/thresholds", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, service_.thresholds());
    }));
    s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        json body = parse_body(req);
        json policy = body.contains("policy") ? body.at("policy") : body;
        send_json(res, 201, service_.create_session(policy));
    }));
    s.Get(R"(/sessions/([0-9a-zA-Z]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, service_.get_session(req.matches[1]));
    }));
    s.Post(R"(/sessions/([0-9a-zA-Z]+)/findings)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, service_.update_findings(req.matches[1], parse_body(req)));
    }));
    s.Post(R"(/sessions/([0-9a-zA-Z]+)/whatif)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        json body = parse_body(req);
        json assignment = body.contains("assignment") ? body.at("assignment") : body;
        send_json(res, 200, service_.what_if(req.matches[1], assignment));
    }));
    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            send_json(res, res.status, {{"code", "http_" + std::to_string(res.status)}, {"message", "no such route"}, {"detail", nullptr}});
        }
    });
}

int HttpServer::start() {
    port_ = opts_.port == 0 ? server_->bind_to_any_port(opts_.host) : (server_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1);
    if (port_ < 0) throw Error("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void HttpServer::run() {
    port_ = opts_.port == 0 ? server_->bind_to_any_port(opts_.host) : (server_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1);
    if (port_ < 0) throw Error("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    server_->listen_after_bind();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace dxr
