#pragma once

#include "fcnet/checkpoint.hpp"
#include "fcnet/dataset.hpp"
#include "fcnet/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace fcnet {

/// Wraps a TorchScript module mapping [1,3,H,W] RGB in [0,1] to a feature
/// tensor (flattened), e.g. an exported Inception pool layer.
class TorchScriptEmbedding final : public Embedding {
public:
    explicit TorchScriptEmbedding(const std::filesystem::path& path);
    ~TorchScriptEmbedding() override;
    Eigen::VectorXd embed(const RgbImage& image) override;
    [[nodiscard]] std::string name() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "identity", "grid" (4x4), "grid:<cells>" or "torchscript:<path>".
std::unique_ptr<Embedding> make_embedding(std::string_view spec);

/// How the generated image of each sample is produced.
///  reference:    w = g(x) of the sample itself
///  shifted:      w = g of the next sample in the set (a different face)
///  automatic:    w = g_auto(l, masks)
///  sample:       every component drawn from the flows, seed + index
///  ground_truth: the sample itself (sanity check of the metric plumbing)
enum class EvalMode { reference, shifted, automatic, sample, ground_truth };

EvalMode eval_mode_from_string(std::string_view text);

struct EvalOptions {
    EvalMode mode = EvalMode::reference;
    std::string embedding = "grid";
    std::uint64_t seed = 0;
};

MetricsReport evaluate(const Checkpoint& checkpoint, const Dataset& dataset, const EvalOptions& options = {});

} // namespace fcnet
