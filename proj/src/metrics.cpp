#include "fcnet/metrics.hpp"

#include "fcnet/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace fcnet {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

void check_pair(const RgbImage& a, const RgbImage& b)
{
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("metric inputs must share H x W");
    }
}

std::vector<double> luma(const RgbImage& img)
{
    std::vector<double> out(static_cast<std::size_t>(img.height) * img.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
    }
    return out;
}

std::vector<double> gaussian_kernel()
{
    std::vector<double> k(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (auto& v : k) {
        v /= sum;
    }
    return k;
}

// Separable valid-mode filtering: output is (h - 10) x (w - 10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k)
{
    const int oh = h - kWindow + 1;
    const int ow = w - kWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) {
                acc += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * w + x + i];
            }
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) {
                acc += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const Eigen::MatrixXd& x)
{
    const Eigen::VectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    return {mu, centered.transpose() * centered / static_cast<double>(x.rows() - 1)};
}

} // namespace

double colorfulness(const RgbImage& rgb)
{
    const std::size_t n = static_cast<std::size_t>(rgb.height) * rgb.width;
    if (n == 0) {
        return 0.0;
    }
    double s_rg = 0.0;
    double s_yb = 0.0;
    double ss_rg = 0.0;
    double ss_yb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rgb.data[3 * i];
        const double g = rgb.data[3 * i + 1];
        const double b = rgb.data[3 * i + 2];
        const double rg = r - g;
        const double yb = 0.5 * (r + g) - b;
        s_rg += rg;
        s_yb += yb;
        ss_rg += rg * rg;
        ss_yb += yb * yb;
    }
    const double nd = static_cast<double>(n);
    const double mu_rg = s_rg / nd;
    const double mu_yb = s_yb / nd;
    const double var_rg = std::max(0.0, ss_rg / nd - mu_rg * mu_rg);
    const double var_yb = std::max(0.0, ss_yb / nd - mu_yb * mu_yb);
    return std::sqrt(var_rg + var_yb) + 0.3 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb);
}

double psnr(const RgbImage& a, const RgbImage& b)
{
    check_pair(a, b);
    if (a.data.empty()) {
        return kPsnrCap;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.data.size());
    if (mse == 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double ssim(const RgbImage& a, const RgbImage& b)
{
    check_pair(a, b);
    if (a.height < kWindow || a.width < kWindow) {
        throw ShapeError("SSIM needs images of at least 11 x 11 pixels");
    }
    const int h = a.height;
    const int w = a.width;
    const auto x = luma(a);
    const auto y = luma(b);
    std::vector<double> xx(x.size());
    std::vector<double> yy(x.size());
    std::vector<double> xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto k = gaussian_kernel();
    const auto mu_x = filter_valid(x, h, w, k);
    const auto mu_y = filter_valid(y, h, w, k);
    const auto e_xx = filter_valid(xx, h, w, k);
    const auto e_yy = filter_valid(yy, h, w, k);
    const auto e_xy = filter_valid(xy, h, w, k);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i];
        const double my = mu_y[i];
        const double vx = e_xx[i] - mx * mx;
        const double vy = e_yy[i] - my * my;
        const double cxy = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
    return total / static_cast<double>(mu_x.size());
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.rows() < 2 || b.rows() < 2) {
        throw InvalidArgument("Frechet distance needs at least two samples per set");
    }
    if (a.cols() != b.cols()) {
        throw ShapeError("Frechet distance feature sets differ in dimension");
    }
    const auto [mu_a, cov_a] = moments(a);
    const auto [mu_b, cov_b] = moments(b);
    const Eigen::MatrixXd root_a = sym_sqrt(cov_a);
    const Eigen::MatrixXd inner = root_a * cov_b * root_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

Eigen::VectorXd IdentityEmbedding::embed(const RgbImage& image)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(image.data.size()));
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = image.data[i] / 255.0;
    }
    return v;
}

Eigen::VectorXd GridEmbedding::embed(const RgbImage& image)
{
    if (image.height < cells_ || image.width < cells_) {
        throw ShapeError("image smaller than the embedding grid");
    }
    const auto lab = rgb_to_lab(image);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3L * cells_ * cells_);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells_) * cells_);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const int cell = (y * cells_ / image.height) * cells_ + x * cells_ / image.width;
            v[3 * cell] += lab.l.at(0, y, x);
            v[3 * cell + 1] += lab.ab.at(0, y, x);
            v[3 * cell + 2] += lab.ab.at(1, y, x);
            count[cell] += 1.0;
        }
    }
    for (Eigen::Index c = 0; c < count.size(); ++c) {
        v.segment(3 * c, 3) /= count[c];
    }
    return v;
}

Eigen::MatrixXd embed_all(const std::vector<RgbImage>& images, Embedding& embedding)
{
    Eigen::MatrixXd out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto v = embedding.embed(images[i]);
        if (i == 0) {
            out.resize(static_cast<Eigen::Index>(images.size()), v.size());
        }
        out.row(static_cast<Eigen::Index>(i)) = v.transpose();
    }
    return out;
}

nlohmann::json MetricsReport::to_json() const
{
    return {{"fid", fid}, {"cf", cf}, {"psnr", psnr}, {"ssim", ssim}, {"samples", samples}, {"embedding", embedding}};
}

MetricsReport compute_metrics(const std::vector<RgbImage>& real, const std::vector<RgbImage>& generated,
                              Embedding& embedding)
{
    if (real.size() != generated.size() || real.empty()) {
        throw InvalidArgument("metrics need equally sized, non-empty real and generated sets");
    }
    MetricsReport r;
    r.samples = real.size();
    r.embedding = embedding.name();
    for (std::size_t i = 0; i < real.size(); ++i) {
        r.cf += colorfulness(generated[i]);
        r.psnr += psnr(real[i], generated[i]);
        r.ssim += ssim(real[i], generated[i]);
    }
    const auto n = static_cast<double>(real.size());
    r.cf /= n;
    r.psnr /= n;
    r.ssim = std::clamp(r.ssim / n, 0.0, 1.0);
    r.fid = std::max(0.0, frechet_distance(embed_all(real, embedding), embed_all(generated, embedding)));
    return r;
}

} // namespace fcnet
