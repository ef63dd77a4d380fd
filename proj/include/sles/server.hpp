#pragma once

#include "sles/gateway.hpp"

#include <memory>
#include <optional>
#include <string>

namespace sles {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::optional<std::string> static_dir;
    std::chrono::milliseconds action_timeout{30000};
};

// HTTP front of a Gateway: JSON routes, the event stream, and the console's
// static files.
class Server {
public:
    Server(Gateway& gateway, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds the port; throws Error when it is taken. Returns the bound port.
    int bind();
    // Serves on a background thread until stop().
    void start();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace sles
