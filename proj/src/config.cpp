#include "fcnet/config.hpp"

#include "fcnet/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fcnet {
namespace {

using boost::property_tree::ptree;

std::string format_double(double v)
{
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
}

std::string format_list(const std::vector<int>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

std::vector<int> parse_list(const std::string& key, const std::string& text)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' must be a comma-separated list of integers");
        }
    }
    return out;
}

template <typename T>
void read(const ptree& tree, const std::string& key, T& target)
{
    const auto node = tree.get_optional<std::string>(key);
    if (!node) {
        return;
    }
    try {
        if constexpr (std::is_same_v<T, bool>) {
            const auto& v = *node;
            if (v == "true" || v == "1" || v == "yes" || v == "on") {
                target = true;
            } else if (v == "false" || v == "0" || v == "no" || v == "off") {
                target = false;
            } else {
                throw std::invalid_argument(v);
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            target = *node;
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            target = *node;
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            target = parse_list(key, *node);
        } else {
            target = tree.get<T>(key);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("invalid value '" + *node + "' for '" + key + "'");
    }
}

} // namespace

void TrainConfig::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string(name) + " must be positive and finite");
        }
    };
    positive(lr_main, "train.lr_main");
    positive(lr_aux, "train.lr_aux");
    positive(batch_main, "train.batch_main");
    positive(batch_aux, "train.batch_aux");
    positive(epochs, "train.epochs");
    positive(image_size, "train.image_size");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0,1)");
    }
    for (double w : {loss.alpha, loss.beta, loss.gamma, loss.auto_image}) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ConfigError("loss weights must be finite and non-negative");
        }
    }
    if (max_steps < 0) {
        throw ConfigError("train.max_steps must be >= 0");
    }
    if (model.d_w <= 0 || model.gray_channels.empty() || model.repr_channels.empty()) {
        throw ConfigError("model sizes must be positive and non-empty");
    }
    if (model.flow_blocks <= 0 || model.d_w % 2 != 0) {
        throw ConfigError("flows need at least one block and an even d_w");
    }
    if (image_size % model.bottleneck_factor() != 0 || image_size % (1 << model.repr_channels.size()) != 0) {
        throw ConfigError("train.image_size must be a multiple of the network down-sampling factors");
    }
    if (!(augment.chroma_min > 0.0 && augment.chroma_min <= augment.chroma_max && augment.scale_min > 0.0 &&
          augment.scale_min <= augment.scale_max)) {
        throw ConfigError("augmentation ranges are inconsistent");
    }
}

TrainConfig parse_config(const std::string& ini_text)
{
    ptree tree;
    std::istringstream in(ini_text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }

    TrainConfig c;
    read(tree, "train.lr_main", c.lr_main);
    read(tree, "train.lr_aux", c.lr_aux);
    read(tree, "train.batch_main", c.batch_main);
    read(tree, "train.batch_aux", c.batch_aux);
    read(tree, "train.adam_beta1", c.adam_beta1);
    read(tree, "train.adam_beta2", c.adam_beta2);
    read(tree, "train.epochs", c.epochs);
    read(tree, "train.max_steps", c.max_steps);
    read(tree, "train.image_size", c.image_size);
    read(tree, "train.seed", c.seed);
    read(tree, "train.perceptual", c.perceptual);
    read(tree, "train.log_every", c.log_every);

    read(tree, "loss.alpha", c.loss.alpha);
    read(tree, "loss.beta", c.loss.beta);
    read(tree, "loss.gamma", c.loss.gamma);
    read(tree, "loss.auto_image", c.loss.auto_image);

    read(tree, "augment.max_hue", c.augment.max_hue);
    read(tree, "augment.chroma_min", c.augment.chroma_min);
    read(tree, "augment.chroma_max", c.augment.chroma_max);
    read(tree, "augment.max_rotation", c.augment.max_rotation);
    read(tree, "augment.scale_min", c.augment.scale_min);
    read(tree, "augment.scale_max", c.augment.scale_max);
    read(tree, "augment.max_translation", c.augment.max_translation);
    read(tree, "augment.flip_probability", c.augment.flip_probability);

    read(tree, "ablation.grouped_design", c.model.grouped_design);
    read(tree, "ablation.repr_branch", c.model.repr_branch);
    read(tree, "ablation.chromatic_aug", c.augment.chromatic);
    read(tree, "ablation.spatial_aug", c.augment.spatial);

    read(tree, "model.d_w", c.model.d_w);
    read(tree, "model.repr_channels", c.model.repr_channels);
    read(tree, "model.repr_head_hidden", c.model.repr_head_hidden);
    read(tree, "model.gray_stem_channels", c.model.gray_stem_channels);
    read(tree, "model.gray_channels", c.model.gray_channels);
    read(tree, "model.gw_hidden", c.model.gw_hidden);
    read(tree, "model.spade_hidden", c.model.spade_hidden);
    read(tree, "model.disc_channels", c.model.disc_channels);
    read(tree, "model.disc_strides", c.model.disc_strides);
    read(tree, "model.flow_blocks", c.model.flow_blocks);
    read(tree, "model.flow_hidden", c.model.flow_hidden);
    read(tree, "model.flow_context", c.model.flow_context);
    read(tree, "model.context_channels", c.model.context_channels);
    read(tree, "model.auto_channels", c.model.auto_channels);
    read(tree, "model.auto_head_hidden", c.model.auto_head_hidden);

    read(tree, "data.root", c.data_root);
    read(tree, "data.synthetic_count", c.synthetic_count);
    read(tree, "data.synthetic_seed", c.synthetic_seed);
    read(tree, "data.mapping", c.mapping);

    c.validate();
    return c;
}

TrainConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto config = parse_config(buffer.str());
    if (!config.data_root.empty() && config.data_root.is_relative()) {
        config.data_root = path.parent_path() / config.data_root;
    }
    if (!config.mapping.empty() && config.mapping.is_relative()) {
        config.mapping = path.parent_path() / config.mapping;
    }
    return config;
}

std::string to_ini(const TrainConfig& c)
{
    auto b = [](bool v) { return v ? "true" : "false"; };
    std::ostringstream o;
    o << "[train]\n"
      << "lr_main = " << format_double(c.lr_main) << "\n"
      << "lr_aux = " << format_double(c.lr_aux) << "\n"
      << "batch_main = " << c.batch_main << "\n"
      << "batch_aux = " << c.batch_aux << "\n"
      << "adam_beta1 = " << format_double(c.adam_beta1) << "\n"
      << "adam_beta2 = " << format_double(c.adam_beta2) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "max_steps = " << c.max_steps << "\n"
      << "image_size = " << c.image_size << "\n"
      << "seed = " << c.seed << "\n"
      << "perceptual = " << c.perceptual << "\n"
      << "log_every = " << c.log_every << "\n\n"
      << "[loss]\n"
      << "alpha = " << format_double(c.loss.alpha) << "\n"
      << "beta = " << format_double(c.loss.beta) << "\n"
      << "gamma = " << format_double(c.loss.gamma) << "\n"
      << "auto_image = " << format_double(c.loss.auto_image) << "\n\n"
      << "[augment]\n"
      << "max_hue = " << format_double(c.augment.max_hue) << "\n"
      << "chroma_min = " << format_double(c.augment.chroma_min) << "\n"
      << "chroma_max = " << format_double(c.augment.chroma_max) << "\n"
      << "max_rotation = " << format_double(c.augment.max_rotation) << "\n"
      << "scale_min = " << format_double(c.augment.scale_min) << "\n"
      << "scale_max = " << format_double(c.augment.scale_max) << "\n"
      << "max_translation = " << format_double(c.augment.max_translation) << "\n"
      << "flip_probability = " << format_double(c.augment.flip_probability) << "\n\n"
      << "[ablation]\n"
      << "grouped_design = " << b(c.model.grouped_design) << "\n"
      << "chromatic_aug = " << b(c.augment.chromatic) << "\n"
      << "spatial_aug = " << b(c.augment.spatial) << "\n"
      << "repr_branch = " << b(c.model.repr_branch) << "\n\n"
      << "[model]\n"
      << "d_w = " << c.model.d_w << "\n"
      << "repr_channels = " << format_list(c.model.repr_channels) << "\n"
      << "repr_head_hidden = " << c.model.repr_head_hidden << "\n"
      << "gray_stem_channels = " << c.model.gray_stem_channels << "\n"
      << "gray_channels = " << format_list(c.model.gray_channels) << "\n"
      << "gw_hidden = " << c.model.gw_hidden << "\n"
      << "spade_hidden = " << c.model.spade_hidden << "\n"
      << "disc_channels = " << format_list(c.model.disc_channels) << "\n"
      << "disc_strides = " << format_list(c.model.disc_strides) << "\n"
      << "flow_blocks = " << c.model.flow_blocks << "\n"
      << "flow_hidden = " << c.model.flow_hidden << "\n"
      << "flow_context = " << c.model.flow_context << "\n"
      << "context_channels = " << format_list(c.model.context_channels) << "\n"
      << "auto_channels = " << format_list(c.model.auto_channels) << "\n"
      << "auto_head_hidden = " << c.model.auto_head_hidden << "\n\n"
      << "[data]\n"
      << "root = " << c.data_root.string() << "\n"
      << "synthetic_count = " << c.synthetic_count << "\n"
      << "synthetic_seed = " << c.synthetic_seed << "\n"
      << "mapping = " << c.mapping.string() << "\n";
    return o.str();
}

TrainConfig desk_config()
{
    TrainConfig c;
    c.image_size = 32;
    c.epochs = 1;
    c.synthetic_count = 32;
    c.model.d_w = 32;
    c.model.repr_channels = {32, 64};
    c.model.repr_head_hidden = 32;
    c.model.gray_stem_channels = 32;
    c.model.gray_channels = {64, 128};
    c.model.gw_hidden = 32;
    c.model.spade_hidden = 32;
    c.model.disc_channels = {16, 32, 64};
    c.model.disc_strides = {2, 2, 1};
    c.model.flow_hidden = 32;
    c.model.flow_context = 16;
    c.model.context_channels = {16, 32};
    c.model.auto_channels = {16, 32};
    c.model.auto_head_hidden = 32;
    return c;
}

} // namespace fcnet
