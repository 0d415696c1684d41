#include "fcnet/checkpoint.hpp"
#include "fcnet/dataset.hpp"
#include "fcnet/error.hpp"
#include "fcnet/image_io.hpp"
#include "fcnet/service.hpp"
#include "support/support.hpp"

#include <catch_amalgamated.hpp>

#include <httplib.h>

using namespace fcnet;
using nlohmann::json;

namespace {

std::string b64(const std::vector<std::uint8_t>& bytes) { return base64_encode(bytes); }

struct Fixture {
    test::TempDir dir;
    std::filesystem::path ck_a;
    std::filesystem::path ck_b;
    SyntheticFace face_a = make_synthetic_face(32, 51);
    SyntheticFace face_b = make_synthetic_face(32, 52);
    std::string gray_a;

    Fixture()
    {
        ck_a = dir / "a.pt";
        ck_b = dir / "b.pt";
        save_checkpoint(test::fresh_checkpoint(test::tiny_config(), 50), ck_a);
        save_checkpoint(test::fresh_checkpoint(test::tiny_config(), 60), ck_b);
        gray_a = b64(encode_png(gray_from_luminance(rgb_to_lab(face_a.image).l)));
    }

    [[nodiscard]] json encode_request(const SyntheticFace& f) const
    {
        return {{"image", b64(encode_png(f.image))}, {"labels", b64(encode_png(f.labels))}};
    }
};

} // namespace

TEST_CASE("base64 helpers", "[service]")
{
    const std::string foo = "foo";
    const std::vector<std::uint8_t> bytes(foo.begin(), foo.end());
    CHECK(base64_encode(bytes) == "Zm9v");
    CHECK(base64_decode("Zm9v") == bytes);
    CHECK(base64_decode("data:image/png;base64,Zm9v") == bytes);
    CHECK(base64_decode("Zm\n9v") == bytes);
    CHECK(base64_decode("") == std::vector<std::uint8_t>{});
    CHECK_THROWS_AS(base64_decode("Zm9v!"), InvalidArgument);
}

TEST_CASE("encode, mix and colorize", "[service]")
{
    Fixture fx;
    Service svc;
    svc.load(fx.ck_a);
    const auto a = svc.handle_json("/encode", fx.encode_request(fx.face_a));
    REQUIRE(a.status == 200);
    const auto b = svc.handle_json("/encode", fx.encode_request(fx.face_b));
    REQUIRE(b.status == 200);

    auto pipeline = svc.snapshot();
    const auto direct = pipeline->encode(fx.face_a.image, pipeline->masks(fx.face_a.labels));
    CHECK(representation_from_json(a.body["representation"]) == direct);
    CHECK(from_binary(base64_decode(a.body["representation_b64"].get<std::string>())) == direct);

    json same;
    for (auto c : kAllComponents) {
        same["parts"][std::string(to_string(c))] = a.body["representation"];
    }
    const auto mixed = svc.handle_json("/mix", same);
    REQUIRE(mixed.status == 200);
    CHECK(mixed.body["representation"] == a.body["representation"]);

    json swap = same;
    swap["parts"]["lips"] = b.body["representation_b64"];
    const auto swapped = svc.handle_json("/mix", swap);
    REQUIRE(swapped.status == 200);
    const auto w = representation_from_json(swapped.body["representation"]);
    const auto wb = representation_from_json(b.body["representation"]);
    CHECK(slice(w, Component::lips) == slice(wb, Component::lips));
    CHECK(slice(w, Component::skin) == slice(direct, Component::skin));

    const auto col = svc.handle_json("/colorize", {{"gray", fx.gray_a},
                                                   {"labels", b64(encode_png(fx.face_a.labels))},
                                                   {"representation", swapped.body["representation"]}});
    REQUIRE(col.status == 200);
    const auto png = base64_decode(col.body["image"].get<std::string>());
    const auto img = decode_rgb(png);
    CHECK(img.height == 32);
    const auto expect = pipeline->colorize(luminance_from_gray(gray_from_luminance(rgb_to_lab(fx.face_a.image).l)),
                                           pipeline->masks(fx.face_a.labels), w);
    CHECK(png == encode_png(lab_to_rgb(expect)));

    // Re-encoding the output with the same masks is close to, not equal to, w (untrained model).
    const auto again = svc.handle_json("/encode", {{"image", col.body["image"]}, {"labels", b64(encode_png(fx.face_a.labels))}});
    REQUIRE(again.status == 200);
    CHECK(representation_from_json(again.body["representation"]).d_w == w.d_w);
}

TEST_CASE("sample is reproducible and needs a fallback for partial subsets", "[service]")
{
    Fixture fx;
    Service svc;
    svc.load(fx.ck_a);
    const json req{{"gray", fx.gray_a}, {"labels", b64(encode_png(fx.face_a.labels))}, {"seed", 12}};
    const auto a = svc.handle_json("/sample", req);
    const auto b = svc.handle_json("/sample", req);
    REQUIRE(a.status == 200);
    CHECK(a.body["image"] == b.body["image"]);
    CHECK(a.body["representation"] == b.body["representation"]);
    CHECK(a.body["seed"] == 12);

    json partial = req;
    partial["subset"] = json::array({"lips", "hair"});
    CHECK(svc.handle_json("/sample", partial).status == 400);
    partial["fallback"] = a.body["representation"];
    const auto p = svc.handle_json("/sample", partial);
    REQUIRE(p.status == 200);
    const auto wp = representation_from_json(p.body["representation"]);
    const auto wa = representation_from_json(a.body["representation"]);
    CHECK(slice(wp, Component::skin) == slice(wa, Component::skin));
    CHECK(slice(wp, Component::lips) == slice(wa, Component::lips));
}

TEST_CASE("error statuses", "[service]")
{
    Fixture fx;
    Service empty;
    const auto no_model = empty.handle_json("/encode", fx.encode_request(fx.face_a));
    CHECK(no_model.status == 503);
    CHECK(no_model.body["error"]["kind"] == "model_state_error");

    ServiceOptions small;
    small.max_image_bytes = 64;
    Service limited(small);
    limited.load(fx.ck_a);
    CHECK(limited.handle_json("/encode", fx.encode_request(fx.face_a)).status == 413);

    Service svc;
    svc.load(fx.ck_a);
    CHECK(svc.handle("/encode", "{not json").status == 400);
    CHECK(svc.handle("/encode", "{not json").body["error"]["kind"] == "malformed_json");
    CHECK(svc.handle("/encode", "[1,2]").status == 400);
    CHECK(svc.handle_json("/encode", {{"image", "@@@"}, {"labels", "x"}}).status == 400);
    CHECK(svc.handle_json("/nowhere", json::object()).status == 404);

    LabelMap bad = fx.face_a.labels;
    bad.ids[0] = 42;
    const auto unknown = svc.handle_json("/encode", {{"image", b64(encode_png(fx.face_a.image))}, {"labels", b64(encode_png(bad))}});
    CHECK(unknown.status == 422);
    CHECK(unknown.body["error"]["kind"] == "unknown_label");

    json masks;
    for (auto c : kAllComponents) {
        masks[std::string(to_string(c))] = b64(encode_png(GrayImage{32, 32, std::vector<std::uint8_t>(32 * 32, 255)}));
    }
    const auto overlap = svc.handle_json("/encode", {{"image", b64(encode_png(fx.face_a.image))}, {"masks", masks}});
    CHECK(overlap.status == 422);
    CHECK(overlap.body["error"]["kind"] == "partition_error");

    CHECK(svc.handle_json("/parse", {{"image", b64(encode_png(fx.face_a.image))}}).status == 503);
}

TEST_CASE("request ids are echoed or derived from the request", "[service]")
{
    Fixture fx;
    Service svc;
    svc.load(fx.ck_a);
    auto req = fx.encode_request(fx.face_a);
    req["request_id"] = "abc-123";
    CHECK(svc.handle_json("/encode", req).body["request_id"] == "abc-123");
    req["request_id"] = 7;
    CHECK(svc.handle_json("/nowhere", req).body["request_id"] == 7);

    const auto body = fx.encode_request(fx.face_b).dump();
    const auto a = svc.handle("/encode", body);
    const auto b = svc.handle("/encode", body);
    const auto id = a.body["request_id"].get<std::string>();
    CHECK(id.size() == 16);
    CHECK(id.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(b.body["request_id"] == id);
    CHECK(svc.handle("/mix", body).body["request_id"] != id);
}

TEST_CASE("parse through a configured parser", "[service]")
{
    Fixture fx;
    test::ParserStub stub;
    ServiceOptions opts;
    opts.parser = ParserEndpoint{stub.url()};
    Service svc(opts);
    const auto r = svc.handle_json("/parse", {{"image", b64(encode_png(fx.face_a.image))}});
    REQUIRE(r.status == 200);
    const auto labels = decode_labels(base64_decode(r.body["labels"].get<std::string>()));
    CHECK(labels == test::synthetic_labels(32));
    const auto masks = map_labels(labels, LabelMapping::celebamask19());
    CHECK(r.body["counts"]["lips"] == masks.count(Component::lips));

    test::ParserStub failing({500, 0});
    ServiceOptions bad;
    bad.parser = ParserEndpoint{failing.url()};
    CHECK(Service(bad).handle_json("/parse", {{"image", b64(encode_png(fx.face_a.image))}}).status == 502);
}

TEST_CASE("HTTP front end: openapi, health, multipart, hot swap", "[service]")
{
    Fixture fx;
    Service svc;
    const int port = svc.start();
    httplib::Client client("127.0.0.1", port);

    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(json::parse(health->body)["loaded"] == false);

    auto spec = client.Get("/openapi.yaml");
    REQUIRE(spec);
    CHECK(spec->body == std::string(openapi_yaml()));
    for (const char* p : {"/parse:", "/encode:", "/colorize:", "/sample:", "/mix:", "openapi: 3"}) {
        CHECK(spec->body.find(p) != std::string::npos);
    }

    svc.load(fx.ck_a);
    const auto json_reply = client.Post("/encode", fx.encode_request(fx.face_a).dump(), "application/json");
    REQUIRE(json_reply);
    CHECK(json_reply->status == 200);

    const auto png = encode_png(fx.face_a.image);
    const auto labels = encode_png(fx.face_a.labels);
    httplib::MultipartFormDataItems items{
        {"image", std::string(png.begin(), png.end()), "a.png", "image/png"},
        {"labels", std::string(labels.begin(), labels.end()), "a_labels.png", "image/png"},
        {"request_id", "\"multi\"", "", "text/plain"},
    };
    const auto multi = client.Post("/encode", items);
    REQUIRE(multi);
    CHECK(multi->status == 200);
    const auto mj = json::parse(multi->body);
    CHECK(mj["request_id"] == "multi");
    CHECK(mj["representation"] == json::parse(json_reply->body)["representation"]);

    svc.load(fx.ck_b);
    const auto after = client.Post("/encode", fx.encode_request(fx.face_a).dump(), "application/json");
    REQUIRE(after);
    CHECK(json::parse(after->body)["representation"] != mj["representation"]);
    auto direct = Pipeline(load_checkpoint(fx.ck_b));
    CHECK(representation_from_json(json::parse(after->body)["representation"]) ==
          direct.encode(fx.face_a.image, direct.masks(fx.face_a.labels)));

    const auto missing = client.Get("/missing");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    svc.stop();
}
