#include "fcnet/service.hpp"

#include "fcnet/checkpoint.hpp"
#include "fcnet/error.hpp"
#include "fcnet/image_io.hpp"

#include <httplib.h>
#include <sodium.h>

#include <map>
#include <thread>

namespace fcnet {
namespace {

using nlohmann::json;

class PayloadTooLarge : public Error {
public:
    explicit PayloadTooLarge(const std::string& message) : Error("payload_too_large", message) {}
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& message) : Error("not_found", message) {}
};

void ensure_sodium()
{
    if (sodium_init() < 0) {
        throw IoError("libsodium failed to initialise");
    }
}

int status_for(std::string_view kind)
{
    if (kind == "payload_too_large") return 413;
    if (kind == "partition_error" || kind == "unknown_label") return 422;
    if (kind == "model_state_error") return 503;
    if (kind == "parser_error") return 502;
    if (kind == "not_found") return 404;
    if (kind == "numeric_error") return 500;
    return 400;
}

std::string request_digest(std::string_view path, const std::string& body)
{
    ensure_sodium();
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(path.data()), path.size());
    crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(body.data()), body.size());
    unsigned char digest[crypto_hash_sha256_BYTES];
    crypto_hash_sha256_final(&st, digest);
    char hex[2 * 8 + 1];
    sodium_bin2hex(hex, sizeof(hex), digest, 8);
    return hex;
}

const json& field(const json& request, const char* name)
{
    if (!request.contains(name)) {
        throw InvalidArgument(std::string("missing field '") + name + "'");
    }
    return request.at(name);
}

std::vector<std::uint8_t> payload(const json& value, const char* name, std::size_t limit)
{
    if (!value.is_string()) {
        throw InvalidArgument(std::string("field '") + name + "' must be a base64 string");
    }
    auto bytes = base64_decode(value.get_ref<const std::string&>());
    if (bytes.size() > limit) {
        throw PayloadTooLarge(std::string("field '") + name + "' exceeds " + std::to_string(limit) + " bytes");
    }
    return bytes;
}

ColorRepresentation read_representation(const json& value, int d_w)
{
    ColorRepresentation w;
    if (value.is_string()) {
        const auto bytes = base64_decode(value.get_ref<const std::string&>());
        w = from_binary(bytes);
    } else if (value.is_object()) {
        w = representation_from_json(value);
    } else {
        throw InvalidArgument("representation must be a JSON object or a base64 string");
    }
    if (d_w > 0 && w.d_w != d_w) {
        throw InvalidArgument("representation width " + std::to_string(w.d_w) + " does not match the model (" +
                              std::to_string(d_w) + ")");
    }
    return w;
}

json write_representation(const ColorRepresentation& w)
{
    return {{"representation", to_json(w)}, {"representation_b64", base64_encode(to_binary(w))}};
}

// `labels` (raw parser ids) or `masks` (five binary PNGs), at model resolution.
ComponentMasks read_masks(const json& request, Pipeline& pipeline, std::size_t limit)
{
    if (request.contains("labels")) {
        return pipeline.masks(decode_labels(payload(request.at("labels"), "labels", limit)));
    }
    if (!request.contains("masks")) {
        throw InvalidArgument("one of 'labels' or 'masks' is required");
    }
    const auto& masks = request.at("masks");
    if (!masks.is_object()) {
        throw InvalidArgument("'masks' must map component names to PNGs");
    }
    std::array<BinaryMask, kNumComponents> binary;
    int h = -1;
    int w = -1;
    for (auto c : kAllComponents) {
        const std::string name(to_string(c));
        if (!masks.contains(name)) {
            throw InvalidArgument("masks." + name + " is missing");
        }
        const auto img = decode_gray(payload(masks.at(name), "masks", limit));
        if (h >= 0 && (img.height != h || img.width != w)) {
            throw ShapeError("component masks differ in size");
        }
        h = img.height;
        w = img.width;
        auto& m = binary[index_of(c)];
        m.resize(img.data.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = img.data[i] != 0 ? 1 : 0;
        }
    }
    const auto partition = ComponentMasks::from_binary(binary, h, w);
    LabelMap ids{h, w, std::vector<std::int32_t>(partition.owners().begin(), partition.owners().end())};
    ids = pipeline.fit(ids);
    ComponentMasks out(ids.height, ids.width);
    for (int y = 0; y < ids.height; ++y) {
        for (int x = 0; x < ids.width; ++x) {
            out.set(y, x, static_cast<Component>(ids.at(y, x)));
        }
    }
    return out;
}

Planes read_gray(const json& request, Pipeline& pipeline, std::size_t limit)
{
    return luminance_from_gray(pipeline.fit(decode_gray(payload(field(request, "gray"), "gray", limit))));
}

std::uint64_t read_seed(const json& request)
{
    if (!request.contains("seed")) {
        return 0;
    }
    const auto& s = request.at("seed");
    if (s.is_number_unsigned()) return s.get<std::uint64_t>();
    if (s.is_number_integer() && s.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(s.get<std::int64_t>());
    if (s.is_string()) {
        try {
            return std::stoull(s.get<std::string>());
        } catch (const std::exception&) {
        }
    }
    throw InvalidArgument("seed must be a non-negative integer");
}

std::array<bool, kNumComponents> read_subset(const json& request)
{
    if (!request.contains("subset")) {
        std::array<bool, kNumComponents> all{};
        all.fill(true);
        return all;
    }
    const auto& s = request.at("subset");
    if (s.is_string()) {
        return parse_component_set(s.get<std::string>());
    }
    if (s.is_array()) {
        std::string joined;
        for (const auto& item : s) {
            if (!item.is_string()) {
                throw InvalidArgument("subset entries must be component names");
            }
            joined += (joined.empty() ? "" : ",") + item.get<std::string>();
        }
        std::array<bool, kNumComponents> none{};
        return joined.empty() ? none : parse_component_set(joined);
    }
    throw InvalidArgument("subset must be a string or an array");
}

json counts_of(const ComponentMasks& masks)
{
    json counts;
    for (auto c : kAllComponents) {
        counts[std::string(to_string(c))] = masks.count(c);
    }
    return counts;
}

} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    ensure_sodium();
    std::string out(sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(out.size() - 1); // trailing NUL
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    ensure_sodium();
    if (text.starts_with("data:")) {
        const auto comma = text.find(',');
        if (comma == std::string_view::npos) {
            throw InvalidArgument("malformed data URL");
        }
        text.remove_prefix(comma + 1);
    }
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), " \r\n\t", &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw InvalidArgument("malformed base64 payload");
    }
    out.resize(len);
    return out;
}

struct Service::Http {
    httplib::Server server;
    std::thread thread;
};

Service::Service(ServiceOptions options) : options_(std::move(options)), http_(std::make_unique<Http>()) {}

Service::~Service()
{
    stop();
}

void Service::load(const std::filesystem::path& checkpoint)
{
    swap(std::make_shared<Pipeline>(load_checkpoint(checkpoint)));
}

void Service::swap(std::shared_ptr<Pipeline> pipeline)
{
    std::lock_guard lock(mutex_);
    pipeline_ = std::move(pipeline);
}

std::shared_ptr<Pipeline> Service::snapshot() const
{
    std::lock_guard lock(mutex_);
    return pipeline_;
}

ServiceReply Service::handle(std::string_view path, const std::string& body) const
{
    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error& e) {
        return {400, {{"request_id", request_digest(path, body)},
                      {"error", {{"kind", "malformed_json"}, {"message", e.what()}}}}};
    }
    if (!request.is_object()) {
        return {400, {{"request_id", request_digest(path, body)},
                      {"error", {{"kind", "malformed_json"}, {"message", "request body must be a JSON object"}}}}};
    }
    if (!request.contains("request_id")) {
        request["request_id"] = request_digest(path, body);
    }
    return handle_json(path, request);
}

ServiceReply Service::handle_json(std::string_view path, const json& request) const
{
    const json id = request.contains("request_id") ? request.at("request_id") : json(request_digest(path, request.dump()));
    const auto limit = options_.max_image_bytes;
    try {
        json out;
        auto model = [&]() {
            auto p = snapshot();
            if (!p) {
                throw ModelStateError("no checkpoint loaded");
            }
            return p;
        };
        if (path == "/parse") {
            if (!options_.parser) {
                throw ModelStateError("no parser endpoint configured");
            }
            const auto image = decode_rgb(payload(field(request, "image"), "image", limit));
            ParsingSource source;
            source.endpoint = options_.parser;
            const auto labels = fetch_parsing(image, source);
            const auto p = snapshot();
            const auto mapping = p ? p->mapping() : LabelMapping::celebamask19();
            const auto masks = map_labels(labels, mapping);
            out = {{"labels", base64_encode(encode_png(labels))},
                   {"preview", base64_encode(encode_png(render_masks(masks)))},
                   {"counts", counts_of(masks)}};
        } else if (path == "/encode") {
            auto p = model();
            const auto image = decode_rgb(payload(field(request, "image"), "image", limit));
            const auto masks = read_masks(request, *p, limit);
            out = write_representation(p->encode(image, masks));
        } else if (path == "/colorize") {
            auto p = model();
            const auto l = read_gray(request, *p, limit);
            const auto masks = read_masks(request, *p, limit);
            const auto w = read_representation(field(request, "representation"), p->checkpoint().config.model.d_w);
            out = {{"image", base64_encode(encode_png(lab_to_rgb(p->colorize(l, masks, w))))}};
        } else if (path == "/sample") {
            auto p = model();
            const auto l = read_gray(request, *p, limit);
            const auto masks = read_masks(request, *p, limit);
            const int d_w = p->checkpoint().config.model.d_w;
            const auto subset = read_subset(request);
            ColorRepresentation fallback = ColorRepresentation::zeros(d_w);
            if (request.contains("fallback")) {
                fallback = read_representation(request.at("fallback"), d_w);
            } else {
                for (bool b : subset) {
                    if (!b) {
                        throw InvalidArgument("a fallback representation is required when subset is not all");
                    }
                }
            }
            const auto seed = read_seed(request);
            const auto w = p->sample(l, masks, seed, subset, fallback);
            out = write_representation(w);
            out["image"] = base64_encode(encode_png(lab_to_rgb(p->colorize(l, masks, w))));
            out["seed"] = seed;
        } else if (path == "/mix") {
            const auto& parts = field(request, "parts");
            if (!parts.is_object()) {
                throw InvalidArgument("'parts' must map component names to representations");
            }
            const auto p = snapshot();
            const int d_w = p ? p->checkpoint().config.model.d_w : 0;
            std::map<Component, ColorRepresentation> items;
            for (const auto& [name, value] : parts.items()) {
                const auto c = component_from_string(name);
                if (!c) {
                    throw InvalidArgument("unknown component '" + name + "'");
                }
                items[*c] = read_representation(value, d_w);
            }
            out = write_representation(recombine(items));
        } else {
            throw NotFound("no endpoint " + std::string(path));
        }
        out["request_id"] = id;
        return {200, out};
    } catch (const Error& e) {
        return {status_for(e.kind()), {{"request_id", id}, {"error", {{"kind", e.kind()}, {"message", e.what()}}}}};
    } catch (const std::exception& e) {
        return {500, {{"request_id", id}, {"error", {{"kind", "internal"}, {"message", e.what()}}}}};
    }
}

namespace {

// Multipart parts become JSON fields: file parts as base64, text parts as
// JSON when they parse and as strings otherwise. `masks.<component>` parts
// are nested under `masks`.
json multipart_to_json(const httplib::Request& req)
{
    json out = json::object();
    for (const auto& [name, part] : req.files) {
        json value;
        if (!part.filename.empty() || part.content_type.starts_with("image/")) {
            value = base64_encode({reinterpret_cast<const std::uint8_t*>(part.content.data()), part.content.size()});
        } else {
            value = json::parse(part.content, nullptr, false);
            if (value.is_discarded()) {
                value = part.content;
            }
        }
        if (name.starts_with("masks.")) {
            out["masks"][name.substr(6)] = value;
        } else {
            out[name] = value;
        }
    }
    return out;
}

} // namespace

void Service::routes()
{
    auto& server = http_->server;
    // Whole-request cap: a few images plus base64 overhead.
    server.set_payload_max_length(6 * options_.max_image_bytes);
    server.Get("/openapi.yaml", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(std::string(openapi_yaml()), "application/yaml");
    });
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"loaded", snapshot() != nullptr}}.dump(), "application/json");
    });
    server.Post(R"(/(parse|encode|colorize|sample|mix))", [this](const httplib::Request& req, httplib::Response& res) {
        ServiceReply reply;
        if (req.is_multipart_form_data()) {
            auto body = multipart_to_json(req);
            if (!body.contains("request_id")) {
                body["request_id"] = request_digest(req.path, body.dump());
            }
            reply = handle_json(req.path, body);
        } else {
            reply = handle(req.path, req.body);
        }
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 413) {
            res.set_content(json{{"request_id", nullptr},
                                 {"error", {{"kind", "payload_too_large"}, {"message", "request body too large"}}}}
                                .dump(),
                            "application/json");
        } else if (res.body.empty()) {
            res.set_content(json{{"request_id", nullptr},
                                 {"error", {{"kind", "http_" + std::to_string(res.status)}, {"message", req.path}}}}
                                .dump(),
                            "application/json");
        }
    });
}

bool Service::listen(const std::string& host, int port)
{
    routes();
    return http_->server.listen(host, port);
}

int Service::start(const std::string& host)
{
    const int port = http_->server.bind_to_any_port(host);
    if (port <= 0) {
        throw IoError("cannot bind " + host);
    }
    routes();
    http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return port;
}

void Service::stop()
{
    if (!http_) {
        return;
    }
    http_->server.stop();
    if (http_->thread.joinable()) {
        http_->thread.join();
    }
}

} // namespace fcnet
