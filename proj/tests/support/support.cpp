#include "support/support.hpp"

#include "fcnet/dataset.hpp"
#include "fcnet/noref.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace fcnet::test {

TrainConfig tiny_config()
{
    auto c = desk_config();
    c.synthetic_count = 8;
    c.max_steps = 2;
    c.log_every = 1;
    return c;
}

Checkpoint fresh_checkpoint(const TrainConfig& config, std::uint64_t seed, bool with_noref)
{
    Checkpoint ck;
    ck.config = config;
    ck.models = Models::create(config.model, seed);
    if (with_noref) {
        ck.models.auto_head = AutoHead(config.model);
        ck.models.flow = FlowSet(config.model);
        for (auto c : kAllComponents) {
            ck.models.flow->flow(c)->randomize(seed + index_of(c));
        }
        ck.models.flow->set_trained(true);
    }
    return ck;
}

Lab oracle_lab(int r8, int g8, int b8)
{
    auto lin = [](int v) {
        const long double c = v / 255.0L;
        return c <= 0.04045L ? c / 12.92L : std::pow((c + 0.055L) / 1.055L, 2.4L);
    };
    const long double r = lin(r8);
    const long double g = lin(g8);
    const long double b = lin(b8);
    const long double x = 0.4124564L * r + 0.3575761L * g + 0.1804375L * b;
    const long double y = 0.2126729L * r + 0.7151522L * g + 0.0721750L * b;
    const long double z = 0.0193339L * r + 0.1191920L * g + 0.9503041L * b;
    const long double xn = 0.95047L;
    const long double yn = 1.0L;
    const long double zn = 1.08883L;
    auto f = [](long double t) {
        const long double d = 6.0L / 29.0L;
        return t > d * d * d ? std::cbrt(t) : t / (3.0L * d * d) + 4.0L / 29.0L;
    };
    const long double fx = f(x / xn);
    const long double fy = f(y / yn);
    const long double fz = f(z / zn);
    return {static_cast<double>(116.0L * fy - 16.0L), static_cast<double>(500.0L * (fx - fy)),
            static_cast<double>(200.0L * (fy - fz))};
}

LabImage random_lab(int height, int width, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> px(0, 255);
    RgbImage rgb(height, width);
    for (auto& v : rgb.data) {
        v = static_cast<std::uint8_t>(px(rng));
    }
    return rgb_to_lab(rgb);
}

ComponentMasks random_masks(int height, int width, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 4);
    ComponentMasks m(height, width);
    for (int by = 0; by < height; by += 4) {
        for (int bx = 0; bx < width; bx += 4) {
            const auto c = static_cast<Component>(pick(rng));
            for (int y = by; y < std::min(height, by + 4); ++y) {
                for (int x = bx; x < std::min(width, bx + 4); ++x) {
                    m.set(y, x, c);
                }
            }
        }
    }
    // Every component present.
    for (int i = 0; i < 5 && height >= 4 && width >= 20; ++i) {
        for (int y = 0; y < 4; ++y) {
            for (int x = 4 * i; x < 4 * i + 4; ++x) {
                m.set(y, x, static_cast<Component>(i));
            }
        }
    }
    return m;
}

LabelMap synthetic_labels(int size, std::uint64_t seed)
{
    return make_synthetic_face(size, seed).labels;
}

TempDir::TempDir()
{
    std::string templ = (std::filesystem::temp_directory_path() / "fcnet-test-XXXXXX").string();
    if (mkdtemp(templ.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = templ;
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

struct ParserStub::Impl {
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

ParserStub::ParserStub() : ParserStub(Behaviour{}) {}

ParserStub::ParserStub(Behaviour behaviour) : impl_(std::make_unique<Impl>())
{
    impl_->server.Post("/parse", [this, behaviour](const httplib::Request& req, httplib::Response& res) {
        ++calls_;
        if (behaviour.status != 200) {
            res.status = behaviour.status;
            res.set_content("parser failure", "text/plain");
            return;
        }
        const auto image =
            decode_rgb(std::span(reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()));
        const int size = behaviour.out_size > 0 ? behaviour.out_size : image.height;
        auto labels = synthetic_labels(size);
        if (behaviour.out_size == 0 && image.width != image.height) {
            labels = resize_nearest(labels, image.height, image.width);
        }
        const auto png = encode_png(labels);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

ParserStub::~ParserStub()
{
    impl_->server.stop();
    impl_->thread.join();
}

std::string ParserStub::url() const
{
    return "http://127.0.0.1:" + std::to_string(impl_->port) + "/parse";
}

namespace {

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

CommandResult run_cli(const std::vector<std::string>& args, const std::string& env)
{
    TempDir dir;
    std::string cmd = "env -u FCNET_PARSER_ENDPOINT " + (env.empty() ? "" : env + " ");
    cmd += shell_quote(FCNET_CLI_PATH);
    for (const auto& a : args) {
        cmd += " " + shell_quote(a);
    }
    cmd += " >" + shell_quote((dir / "out").string()) + " 2>" + shell_quote((dir / "err").string());
    const int status = std::system(cmd.c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "out");
    r.err = slurp(dir / "err");
    return r;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace fcnet::test
