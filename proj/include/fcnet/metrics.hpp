#pragma once

#include "fcnet/colorspace.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace fcnet {

inline constexpr double kPsnrCap = 99.0;

/// Hasler-Suesstrunk: sigma_rgyb + 0.3 * mu_rgyb with rg = R - G and
/// yb = (R + G) / 2 - B over all pixels (population statistics).
double colorfulness(const RgbImage& rgb);

/// 10 log10(255^2 / MSE) over all channels, capped at 99 dB.
double psnr(const RgbImage& a, const RgbImage& b);

/// Mean SSIM on BT.601 luma (0..255) with an 11x11 Gaussian window
/// (sigma 1.5), valid windows only, C1 = (0.01*255)^2, C2 = (0.03*255)^2.
/// Not clamped: strongly anti-correlated images score below zero.
double ssim(const RgbImage& a, const RgbImage& b);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) for N x D feature
/// rows. The square root goes through symmetric eigendecompositions with
/// negative eigenvalues clipped to zero. Needs N >= 2 in both sets.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Image -> feature vector for the Frechet distance.
class Embedding {
public:
    virtual ~Embedding() = default;
    virtual Eigen::VectorXd embed(const RgbImage& image) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Raw pixels scaled to [0,1].
class IdentityEmbedding final : public Embedding {
public:
    Eigen::VectorXd embed(const RgbImage& image) override;
    [[nodiscard]] std::string name() const override { return "identity"; }
};

/// Mean Lab colour of each cell of a cells x cells grid (3 * cells^2 values).
class GridEmbedding final : public Embedding {
public:
    explicit GridEmbedding(int cells = 4) : cells_(cells) {}
    Eigen::VectorXd embed(const RgbImage& image) override;
    [[nodiscard]] std::string name() const override { return "grid" + std::to_string(cells_); }

private:
    int cells_;
};

Eigen::MatrixXd embed_all(const std::vector<RgbImage>& images, Embedding& embedding);

struct MetricsReport {
    double fid = 0.0;
    double cf = 0.0;   // mean over the generated images
    double psnr = 0.0; // mean over pairs
    double ssim = 0.0; // mean over pairs, reported in [0, 1]
    std::size_t samples = 0;
    std::string embedding;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Pairs real[i] with generated[i].
MetricsReport compute_metrics(const std::vector<RgbImage>& real, const std::vector<RgbImage>& generated,
                              Embedding& embedding);

} // namespace fcnet
