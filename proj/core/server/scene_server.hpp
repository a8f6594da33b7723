#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "dtb/scene.hpp"

namespace dtb {

/// JSON-over-HTTP front for a SessionManager.
class SceneServer {
public:
    explicit SceneServer(std::shared_ptr<SessionManager> sessions, unsigned workers = 0);
    ~SceneServer();

    SceneServer(const SceneServer&) = delete;
    SceneServer& operator=(const SceneServer&) = delete;

    // Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);

    // Serves until stop(); blocks the calling thread.
    void listen();

    // bind + listen on a background thread.
    int start(const std::string& host, int port);

    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dtb
