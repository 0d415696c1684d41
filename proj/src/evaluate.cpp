#include "fcnet/evaluate.hpp"

#include "fcnet/error.hpp"
#include "fcnet/pipeline.hpp"
#include "fcnet/random.hpp"

#include <torch/script.h>

namespace fcnet {

struct TorchScriptEmbedding::Impl {
    std::filesystem::path path;
    torch::jit::Module module;
};

TorchScriptEmbedding::TorchScriptEmbedding(const std::filesystem::path& path) : impl_(std::make_unique<Impl>())
{
    impl_->path = path;
    try {
        impl_->module = torch::jit::load(path.string());
    } catch (const c10::Error& e) {
        throw IoError("cannot load TorchScript embedding " + path.string() + ": " + e.what_without_backtrace());
    }
    impl_->module.eval();
}

TorchScriptEmbedding::~TorchScriptEmbedding() = default;

Eigen::VectorXd TorchScriptEmbedding::embed(const RgbImage& image)
{
    torch::NoGradGuard no_grad;
    auto bytes = torch::from_blob(const_cast<std::uint8_t*>(image.data.data()), {image.height, image.width, 3},
                                  torch::kUInt8);
    const auto input = bytes.permute({2, 0, 1}).unsqueeze(0).to(torch::kFloat32).div(255.0);
    const auto out = impl_->module.forward({input});
    torch::Tensor t;
    if (out.isTensor()) {
        t = out.toTensor();
    } else if (out.isTuple()) {
        t = out.toTuple()->elements().at(0).toTensor();
    } else {
        throw InvalidArgument("TorchScript embedding must return a tensor or a tuple");
    }
    t = t.reshape({-1}).to(torch::kFloat64).contiguous();
    Eigen::VectorXd v(t.numel());
    std::copy_n(t.data_ptr<double>(), t.numel(), v.data());
    return v;
}

std::string TorchScriptEmbedding::name() const
{
    return "torchscript:" + impl_->path.string();
}

std::unique_ptr<Embedding> make_embedding(std::string_view spec)
{
    if (spec == "identity") {
        return std::make_unique<IdentityEmbedding>();
    }
    if (spec == "grid") {
        return std::make_unique<GridEmbedding>();
    }
    if (spec.starts_with("grid:")) {
        int cells = 0;
        try {
            cells = std::stoi(std::string(spec.substr(5)));
        } catch (const std::exception&) {
            cells = 0;
        }
        if (cells <= 0) {
            throw ConfigError("bad grid size in embedding '" + std::string(spec) + "'");
        }
        return std::make_unique<GridEmbedding>(cells);
    }
    if (spec.starts_with("torchscript:")) {
        return std::make_unique<TorchScriptEmbedding>(std::filesystem::path(std::string(spec.substr(12))));
    }
    throw ConfigError("unknown embedding '" + std::string(spec) + "'");
}

EvalMode eval_mode_from_string(std::string_view text)
{
    if (text == "reference") return EvalMode::reference;
    if (text == "shifted") return EvalMode::shifted;
    if (text == "auto" || text == "automatic") return EvalMode::automatic;
    if (text == "sample") return EvalMode::sample;
    if (text == "ground_truth") return EvalMode::ground_truth;
    throw InvalidArgument("unknown eval mode '" + std::string(text) + "'");
}

MetricsReport evaluate(const Checkpoint& checkpoint, const Dataset& dataset, const EvalOptions& options)
{
    if (dataset.empty()) {
        throw InvalidArgument("evaluation dataset is empty");
    }
    auto embedding = make_embedding(options.embedding);
    Pipeline pipeline(checkpoint);
    const std::size_t n = dataset.size();
    std::vector<RgbImage> real;
    std::vector<RgbImage> fake;
    real.reserve(n);
    fake.reserve(n);
    std::array<bool, kNumComponents> all{};
    all.fill(true);
    const int d_w = checkpoint.config.model.d_w;
    ColorEncoder g = checkpoint.models.g;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = dataset[i];
        real.push_back(lab_to_rgb(s.image));
        LabImage out;
        switch (options.mode) {
        case EvalMode::ground_truth: out = s.image; break;
        case EvalMode::reference:
            out = pipeline.colorize(s.image.l, s.masks, encode(s.image.ab, s.masks, g));
            break;
        case EvalMode::shifted: {
            const auto& r = dataset[(i + 1) % n];
            out = pipeline.colorize(s.image.l, s.masks, encode(r.image.ab, r.masks, g));
            break;
        }
        case EvalMode::automatic:
            out = pipeline.colorize(s.image.l, s.masks, pipeline.automatic(s.image.l, s.masks));
            break;
        case EvalMode::sample:
            out = pipeline.colorize(s.image.l, s.masks,
                                    pipeline.sample(s.image.l, s.masks, mix_seed(options.seed, i), all,
                                                    ColorRepresentation::zeros(d_w)));
            break;
        }
        fake.push_back(lab_to_rgb(out));
    }
    return compute_metrics(real, fake, *embedding);
}

} // namespace fcnet
