#include "fcnet/error.hpp"
#include "fcnet/losses.hpp"
#include "support/support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace fcnet;
using Catch::Approx;

namespace {

double oracle_rgb_mse(const LabImage& a, const LabImage& b)
{
    double sum = 0.0;
    const std::size_t n = a.l.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        double ra = 0, ga = 0, ba = 0, rb = 0, gb = 0, bb = 0;
        lab_to_srgb({a.l.values[i], a.ab.plane(0)[i], a.ab.plane(1)[i]}, ra, ga, ba);
        lab_to_srgb({b.l.values[i], b.ab.plane(0)[i], b.ab.plane(1)[i]}, rb, gb, bb);
        sum += (ra - rb) * (ra - rb) + (ga - gb) * (ga - gb) + (ba - bb) * (ba - bb);
    }
    return sum / static_cast<double>(3 * n);
}

} // namespace

TEST_CASE("l1 in Lab units", "[losses]")
{
    const auto x = test::random_lab(8, 8, 1);
    CHECK(loss_l1(x, x) == 0.0);
    auto shifted = x;
    for (auto& v : shifted.ab.values) {
        v += 3.0F;
    }
    CHECK(loss_l1(shifted, x) == Approx(3.0).margin(1e-5));

    const auto y = test::random_lab(8, 8, 2);
    double sum = 0.0;
    for (std::size_t i = 0; i < x.ab.values.size(); ++i) {
        sum += std::abs(static_cast<double>(x.ab.values[i]) - y.ab.values[i]);
    }
    CHECK(loss_l1(x, y) == Approx(sum / static_cast<double>(x.ab.values.size())).epsilon(1e-9));
    CHECK_THROWS_AS(loss_l1(x, test::random_lab(4, 8, 1)), ShapeError);
}

TEST_CASE("perceptual loss with the identity extractor is RGB MSE", "[losses]")
{
    IdentityExtractor id;
    const auto x = test::random_lab(8, 8, 3);
    const auto y = test::random_lab(8, 8, 4);
    CHECK(loss_perceptual(x, x, id) == 0.0);
    const double xy = loss_perceptual(x, y, id);
    CHECK(xy == Approx(loss_perceptual(y, x, id)).epsilon(1e-6));
    CHECK(xy == Approx(oracle_rgb_mse(x, y)).epsilon(1e-3));
}

TEST_CASE("cycle loss over present components", "[losses]")
{
    const auto cfg = test::tiny_config();
    torch::manual_seed(5);
    ColorEncoder g(cfg.model);
    const auto x = test::random_lab(32, 32, 5);
    const auto m = test::random_masks(32, 32, 5);
    const auto w = encode(x.ab, m, g);
    CHECK(loss_cycle(x, m, w, g) == 0.0);

    auto w_in = w;
    for (auto& v : w_in.vectors[1]) {
        v += 0.5F;
    }
    CHECK(loss_cycle(x, m, w_in, g) == Approx(0.5 / 5.0).epsilon(1e-5));

    // An absent component does not count, whatever its stored vector.
    w_in.present[1] = false;
    CHECK(loss_cycle(x, m, w_in, g) == 0.0);

    const auto y = test::random_lab(32, 32, 6);
    const auto re = encode(y.ab, m, g);
    double sum = 0.0;
    int count = 0;
    for (std::size_t c = 0; c < kNumComponents; ++c) {
        if (!w.present[c]) {
            continue;
        }
        for (std::size_t k = 0; k < w.vectors[c].size(); ++k) {
            sum += std::abs(static_cast<double>(re.vectors[c][k]) - w.vectors[c][k]);
            ++count;
        }
    }
    CHECK(loss_cycle(y, m, w, g) == Approx(sum / count).epsilon(1e-5));

    const auto none = ColorRepresentation::zeros(cfg.model.d_w);
    CHECK(loss_cycle(y, m, none, g) == 0.0);
}

TEST_CASE("hinge adversarial loss", "[losses]")
{
    const auto real = torch::full({1, 1, 2, 2}, 2.0);
    const auto fake = torch::full({1, 1, 2, 2}, -2.0);
    CHECK(loss_adversarial(real, fake, AdversarialSide::discriminator) == 0.0);
    CHECK(loss_adversarial(torch::zeros({1, 1, 2, 2}), torch::zeros({1, 1, 2, 2}), AdversarialSide::discriminator) ==
          Approx(2.0));
    CHECK(loss_adversarial(torch::Tensor(), fake, AdversarialSide::generator) == Approx(2.0));

    torch::manual_seed(7);
    const auto r = torch::randn({1, 1, 5, 5}, torch::kFloat64) * 2;
    const auto f = torch::randn({1, 1, 5, 5}, torch::kFloat64) * 2;
    double lr = 0.0, lf = 0.0, g = 0.0;
    for (int i = 0; i < 25; ++i) {
        const double rv = r.flatten()[i].item<double>();
        const double fv = f.flatten()[i].item<double>();
        lr += std::max(0.0, 1.0 - rv);
        lf += std::max(0.0, 1.0 + fv);
        g -= fv;
    }
    CHECK(loss_adversarial(r, f, AdversarialSide::discriminator) == Approx((lr + lf) / 25.0).epsilon(1e-12));
    CHECK(loss_adversarial(r, f, AdversarialSide::generator) == Approx(g / 25.0).epsilon(1e-12));
}

TEST_CASE("extractor factory", "[losses]")
{
    CHECK(make_extractor("none") == nullptr);
    CHECK(make_extractor("identity")->name() == "identity");
    CHECK_THROWS_AS(make_extractor("vgg"), ConfigError);
    CHECK_THROWS_AS(make_extractor("torchscript:/nonexistent/model.pt"), ConfigError);
}
