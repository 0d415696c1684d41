#pragma once

#include "fcnet/parsing.hpp"
#include "fcnet/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fcnet {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Accepts standard base64, with or without a `data:...;base64,` prefix.
/// Throws InvalidArgument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct ServiceOptions {
    std::optional<ParserEndpoint> parser;
    /// Decoded size limit of a single image payload.
    std::size_t max_image_bytes = 8U << 20U;
};

struct ServiceReply {
    int status = 200;
    nlohmann::json body;
};

/// Stateless JSON inference API. Every request carries all of its inputs;
/// the only server-side state is the read-only model snapshot, which
/// load()/swap() replace atomically between requests.
///
///   POST /parse     {image}                               -> {labels, preview, counts}
///   POST /encode    {image, labels | masks}               -> {representation, representation_b64}
///   POST /colorize  {gray, labels | masks, representation} -> {image}
///   POST /sample    {gray, labels | masks, seed, subset, fallback?} -> {image, representation, ...}
///   POST /mix       {parts: {component: representation}}  -> {representation, representation_b64}
///   GET  /openapi.yaml, GET /health
///
/// Images are base64 PNG. `labels` is a raw parser label map, `masks` an
/// object of five binary mask PNGs. Representations are either the JSON form
/// or a base64 string of the binary form. Responses echo `request_id`, or a
/// digest of the request when the client sent none.
class Service {
public:
    explicit Service(ServiceOptions options = {});

    void load(const std::filesystem::path& checkpoint);
    void swap(std::shared_ptr<Pipeline> pipeline);
    [[nodiscard]] std::shared_ptr<Pipeline> snapshot() const;

    ServiceReply handle(std::string_view path, const std::string& body) const;
    ServiceReply handle_json(std::string_view path, const nlohmann::json& request) const;

    /// Blocks serving HTTP until stop(). Returns false when the bind fails.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and serves on a background thread.
    int start(const std::string& host = "127.0.0.1");
    void stop();

    ~Service();

private:
    struct Http;
    void routes();

    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::shared_ptr<Pipeline> pipeline_;
    std::unique_ptr<Http> http_;
};

/// The shipped OpenAPI description.
std::string_view openapi_yaml();

} // namespace fcnet
