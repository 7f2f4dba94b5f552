#pragma once
// HTTP + JSON transport for ConsultService.

#include <memory>
#include <string>
#include <thread>

#include "dxr/service.hpp"

namespace httplib {
class Server;
}

namespace dxr {

struct HttpOptions {
    std::string host = "127.0.0.1";
    int port = 8080;              // 0 picks a free port
    std::string cors_origin = "*";
};

class HttpServer {
public:
    HttpServer(ConsultService& service, HttpOptions opts);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and serves in a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const { return port_; }

private:
    void install_routes();

    ConsultService& service_;
    HttpOptions opts_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace dxr
