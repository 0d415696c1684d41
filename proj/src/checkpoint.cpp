#include "fcnet/checkpoint.hpp"

#include "fcnet/error.hpp"

#include <sodium.h>

#include <fstream>
#include <map>
#include <sstream>

namespace fcnet {
namespace {

using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

template <typename ModuleHolder>
void write_module(OutputArchive& archive, const std::string& key, const ModuleHolder& module)
{
    if (module.is_empty()) {
        return;
    }
    OutputArchive sub;
    module->save(sub);
    archive.write(key, sub);
}

template <typename ModuleHolder>
bool read_module(InputArchive& archive, const std::string& key, ModuleHolder& module)
{
    InputArchive sub;
    if (!archive.try_read(key, sub)) {
        return false;
    }
    module->load(sub);
    return true;
}

bool same_module(const torch::nn::Module& a, const torch::nn::Module& b)
{
    const auto pa = a.named_parameters();
    const auto pb = b.named_parameters();
    const auto ba = a.named_buffers();
    const auto bb = b.named_buffers();
    if (pa.size() != pb.size() || ba.size() != bb.size()) {
        return false;
    }
    auto same = [](const torch::OrderedDict<std::string, torch::Tensor>& x,
                   const torch::OrderedDict<std::string, torch::Tensor>& y) {
        for (const auto& item : x) {
            const auto* other = y.find(item.key());
            if (other == nullptr || other->scalar_type() != item.value().scalar_type() ||
                !torch::equal(*other, item.value())) {
                return false;
            }
        }
        return true;
    };
    return same(pa, pb) && same(ba, bb);
}

template <typename ModuleHolder>
bool same_holder(const ModuleHolder& a, const ModuleHolder& b)
{
    if (a.is_empty() || b.is_empty()) {
        return a.is_empty() == b.is_empty();
    }
    return same_module(*a, *b);
}

// libtorch keys optimiser state by parameter address; map addresses to
// "<group>/<index>" so two archives of the same state compare equal.
using AddressMap = std::map<std::string, std::string>;

AddressMap parameter_names(InputArchive& archive)
{
    AddressMap names;
    InputArchive groups;
    if (!archive.try_read("param_groups", groups)) {
        return names;
    }
    torch::Tensor n_groups;
    groups.read("param_groups/size", n_groups);
    for (std::int64_t g = 0; g < n_groups.item<std::int64_t>(); ++g) {
        InputArchive group;
        groups.read("param_groups/" + std::to_string(g), group);
        torch::Tensor n_params;
        group.read("params/size", n_params);
        for (std::int64_t i = 0; i < n_params.item<std::int64_t>(); ++i) {
            c10::IValue address;
            group.read("params/" + std::to_string(i), address);
            names[address.toStringRef()] = std::to_string(g) + "/" + std::to_string(i);
        }
    }
    return names;
}

std::string canonical(const AddressMap& names, const std::string& s)
{
    const auto it = names.find(s);
    return it == names.end() ? s : "param:" + it->second;
}

bool same_archive(InputArchive& a, const AddressMap& na, InputArchive& b, const AddressMap& nb)
{
    std::map<std::string, std::string> ka;
    std::map<std::string, std::string> kb;
    for (const auto& k : a.keys()) {
        ka[canonical(na, k)] = k;
    }
    for (const auto& k : b.keys()) {
        kb[canonical(nb, k)] = k;
    }
    if (ka.size() != kb.size()) {
        return false;
    }
    for (const auto& [name, key_a] : ka) {
        const auto it = kb.find(name);
        if (it == kb.end()) {
            return false;
        }
        const auto& key_b = it->second;
        InputArchive sa;
        InputArchive sb;
        if (a.try_read(key_a, sa)) {
            if (!b.try_read(key_b, sb) || !same_archive(sa, na, sb, nb)) {
                return false;
            }
            continue;
        }
        c10::IValue va;
        c10::IValue vb;
        if (!a.try_read(key_a, va) || !b.try_read(key_b, vb)) {
            return false;
        }
        if (va.isTensor() || vb.isTensor()) {
            if (!va.isTensor() || !vb.isTensor() || va.toTensor().scalar_type() != vb.toTensor().scalar_type() ||
                !torch::equal(va.toTensor(), vb.toTensor())) {
                return false;
            }
        } else if (va.isString() && vb.isString()) {
            if (canonical(na, va.toStringRef()) != canonical(nb, vb.toStringRef())) {
                return false;
            }
        } else if (va != vb) {
            return false;
        }
    }
    return true;
}

bool same_optimizer_state(const std::string& a, const std::string& b)
{
    if (a == b) {
        return true;
    }
    try {
        InputArchive ia;
        InputArchive ib;
        std::istringstream sa(a);
        std::istringstream sb(b);
        ia.load_from(sa);
        ib.load_from(sb);
        return same_archive(ia, parameter_names(ia), ib, parameter_names(ib));
    } catch (const c10::Error&) {
        return false;
    }
}

bool same_optimizer_states(const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b)
{
    if (a.size() != b.size()) {
        return false;
    }
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end() || !same_optimizer_state(bytes, it->second)) {
            return false;
        }
    }
    return true;
}

} // namespace

Models Models::create(const ModelConfig& config, std::uint64_t seed)
{
    torch::manual_seed(seed);
    Models m;
    m.g = ColorEncoder(config);
    m.f = Colorizer(config);
    m.d = PatchDiscriminator(config);
    return m;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path)
{
    OutputArchive archive;
    archive.write("format_version", c10::IValue(Checkpoint::kFormatVersion));
    archive.write("config", c10::IValue(to_ini(checkpoint.config)));
    archive.write("step", c10::IValue(checkpoint.step));
    write_module(archive, "g", checkpoint.models.g);
    write_module(archive, "f", checkpoint.models.f);
    write_module(archive, "d", checkpoint.models.d);
    write_module(archive, "flow", checkpoint.models.flow);
    write_module(archive, "auto", checkpoint.models.auto_head);
    std::string keys;
    for (const auto& [key, bytes] : checkpoint.optimizer_states) {
        keys += (keys.empty() ? "" : ",") + key;
        auto blob = torch::empty({static_cast<long>(bytes.size())}, torch::kUInt8);
        std::copy(bytes.begin(), bytes.end(), reinterpret_cast<char*>(blob.data_ptr<std::uint8_t>()));
        archive.write("optim." + key, blob, /*is_buffer=*/true);
    }
    archive.write("optim_keys", c10::IValue(keys));
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    try {
        archive.save_to(path.string());
    } catch (const c10::Error& e) {
        throw IoError("cannot write checkpoint '" + path.string() + "': " + e.what_without_backtrace());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw IoError("checkpoint '" + path.string() + "' does not exist");
    }
    InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw IoError("cannot read checkpoint '" + path.string() + "': " + e.what_without_backtrace());
    }
    c10::IValue value;
    if (!archive.try_read("format_version", value) || !value.isInt()) {
        throw IoError("'" + path.string() + "' is not an fcnet checkpoint");
    }
    if (value.toInt() != Checkpoint::kFormatVersion) {
        throw IoError("unsupported checkpoint format version " + std::to_string(value.toInt()));
    }
    Checkpoint c;
    archive.read("config", value);
    c.config = parse_config(value.toStringRef());
    archive.read("step", value);
    c.step = value.toInt();

    c.models = Models::create(c.config.model, c.config.seed);
    if (!read_module(archive, "g", c.models.g) || !read_module(archive, "f", c.models.f) ||
        !read_module(archive, "d", c.models.d)) {
        throw IoError("checkpoint '" + path.string() + "' lacks the main networks");
    }
    FlowSet flow(c.config.model);
    if (read_module(archive, "flow", flow)) {
        c.models.flow = flow;
    }
    AutoHead head(c.config.model);
    if (read_module(archive, "auto", head)) {
        c.models.auto_head = head;
    }

    archive.read("optim_keys", value);
    std::stringstream keys(value.toStringRef());
    std::string key;
    while (std::getline(keys, key, ',')) {
        torch::Tensor blob;
        archive.read("optim." + key, blob, /*is_buffer=*/true);
        const auto* data = reinterpret_cast<const char*>(blob.data_ptr<std::uint8_t>());
        c.optimizer_states[key] = std::string(data, data + blob.numel());
    }
    return c;
}

bool same_state(const Checkpoint& a, const Checkpoint& b)
{
    return a.config == b.config && a.step == b.step && same_optimizer_states(a.optimizer_states, b.optimizer_states) &&
           same_holder(a.models.g, b.models.g) && same_holder(a.models.f, b.models.f) &&
           same_holder(a.models.d, b.models.d) && same_holder(a.models.flow, b.models.flow) &&
           same_holder(a.models.auto_head, b.models.auto_head);
}

std::string file_sha256(const std::filesystem::path& path)
{
    if (sodium_init() < 0) {
        throw IoError("libsodium failed to initialise");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    crypto_hash_sha256_state state;
    crypto_hash_sha256_init(&state);
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        const auto n = in.gcount();
        if (n > 0) {
            crypto_hash_sha256_update(&state, reinterpret_cast<const unsigned char*>(buffer.data()),
                                      static_cast<unsigned long long>(n));
        }
    }
    unsigned char digest[crypto_hash_sha256_BYTES];
    crypto_hash_sha256_final(&state, digest);
    char hex[2 * crypto_hash_sha256_BYTES + 1];
    sodium_bin2hex(hex, sizeof(hex), digest, sizeof(digest));
    return hex;
}

} // namespace fcnet
