// fcnet HTTP inference service. SIGHUP reloads the checkpoint in place.

#include "fcnet/error.hpp"
#include "fcnet/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

std::atomic<bool> g_reload{false};
std::atomic<bool> g_stop{false};

void on_signal(int sig)
{
    if (sig == SIGHUP) {
        g_reload = true;
    } else {
        g_stop = true;
    }
}

void log_line(const nlohmann::json& j)
{
    std::cerr << j.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"fcnet HTTP inference service"};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string checkpoint;
    std::string parser;
    app.add_option("--host", host, "Bind address");
    app.add_option("--port", port, "Port");
    app.add_option("--checkpoint", checkpoint, "Checkpoint to serve (requests answer 503 until one is loaded)");
    app.add_option("--parser-endpoint", parser, "Face parser URL (default $FCNET_PARSER_ENDPOINT)");
    CLI11_PARSE(app, argc, argv);

    fcnet::ServiceOptions options;
    if (parser.empty()) {
        if (const char* env = std::getenv(fcnet::kParserEndpointEnv); env != nullptr && *env != '\0') {
            parser = env;
        }
    }
    if (!parser.empty()) {
        options.parser = fcnet::ParserEndpoint{parser};
    }
    fcnet::Service service(options);
    if (!checkpoint.empty()) {
        try {
            service.load(checkpoint);
        } catch (const fcnet::Error& e) {
            log_line({{"error", {{"kind", e.kind()}, {"message", e.what()}}}});
            return 1;
        }
    }

    std::signal(SIGHUP, on_signal);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_stop) {
            if (g_reload.exchange(false) && !checkpoint.empty()) {
                try {
                    service.load(checkpoint);
                    log_line({{"event", "reloaded"}, {"checkpoint", checkpoint}});
                } catch (const fcnet::Error& e) {
                    log_line({{"event", "reload_failed"}, {"kind", e.kind()}, {"message", e.what()}});
                }
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        service.stop();
    });

    log_line({{"event", "listening"}, {"host", host}, {"port", port}});
    const bool ok = service.listen(host, port);
    g_stop = true;
    watcher.join();
    if (!ok) {
        log_line({{"error", {{"kind", "io_error"}, {"message", "cannot listen on " + host + ":" + std::to_string(port)}}}});
        return 1;
    }
    return 0;
}
