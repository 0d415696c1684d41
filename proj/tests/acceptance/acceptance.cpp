// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments
// select criteria by name (e.g. `fcnet_acceptance flow metrics`).

#include "fcnet/augment.hpp"
#include "fcnet/checkpoint.hpp"
#include "fcnet/colorizer.hpp"
#include "fcnet/dataset.hpp"
#include "fcnet/metrics.hpp"
#include "fcnet/noref.hpp"
#include "fcnet/tensors.hpp"
#include "fcnet/trainer.hpp"
#include "support/support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace fcnet;

namespace {

constexpr double kFlowInverseTol = 1e-5;
constexpr double kFlowLogdetRelTol = 1e-4;
constexpr double kPsnrOffsetExpect = 28.13;
constexpr double kPsnrOffsetTol = 0.01;
constexpr double kFrechetIdenticalTol = 1e-6;
constexpr double kFrechetShiftRelTol = 0.05;
constexpr double kGradRelTol = 1e-3;
constexpr int kSmokeSteps = 200;
constexpr double kSmokeL1Ratio = 0.7;
constexpr int kLocalitySteps = 2000;
constexpr int kLocalityPairs = 20;
constexpr int kLocalityRadius = 4;
constexpr double kLocalityRatio = 0.1;
constexpr double kObjectiveRelTol = 1e-12;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome grouped_isolation()
{
    const auto cfg = desk_config();
    double worst_outside = 0.0;
    double min_inside = 1e30;
    for (int init = 0; init < 10; ++init) {
        torch::manual_seed(1000 + init);
        Colorizer f(cfg.model);
        torch::NoGradGuard no_grad;
        const auto masks = test::random_masks(32, 32, 2000 + init);
        const auto low = downscale_mask_tensor(masks_to_tensor(masks).unsqueeze(0), cfg.model.bottleneck_factor());
        const RepresentationBatch w{torch::randn({1, 5, cfg.model.d_w}), torch::ones({1, 5})};
        const auto base = f->decode_repr(w, low);
        for (int c = 0; c < 5; ++c) {
            auto moved = w;
            moved.vectors = w.vectors.clone();
            moved.vectors[0][c] += torch::randn({cfg.model.d_w});
            const auto out = f->decode_repr(moved, low);
            const auto outside = (1.0 - low[0][c]).unsqueeze(0);
            const auto inside = low[0][c].unsqueeze(0);
            const auto dg = (out.gamma - base.gamma).abs();
            const auto db = (out.beta - base.beta).abs();
            worst_outside = std::max({worst_outside, (dg * outside).max().item<double>(), (db * outside).max().item<double>()});
            if (low[0][c].sum().item<double>() > 0) {
                min_inside = std::min(min_inside, (dg * inside).max().item<double>());
            }
        }
    }
    return {worst_outside == 0.0 && min_inside > 0.0,
            "max |change| outside = " + fmt(worst_outside) + ", min max |change| inside = " + fmt(min_inside)};
}

Outcome l_preservation()
{
    const auto cfg = desk_config();
    torch::manual_seed(3);
    Colorizer f(cfg.model);
    ColorEncoder g(cfg.model);
    int identical = 0;
    for (int i = 0; i < 50; ++i) {
        const auto x = test::random_lab(32, 32, 3000 + i);
        const auto masks = test::random_masks(32, 32, 3000 + i);
        auto w = encode(test::random_lab(32, 32, 4000 + i).ab, masks, g);
        if (i % 5 == 0) {
            w.present[static_cast<std::size_t>(i / 5 % 5)] = false;
        }
        const auto out = generate(x.l, w, masks, f);
        identical += out.l == x.l ? 1 : 0;
    }
    return {identical == 50, std::to_string(identical) + "/50 bit-identical"};
}

Outcome composite_exactness()
{
    int exact = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = test::random_lab(32, 32, 5000 + i);
        const auto masks = test::random_masks(32, 32, 5000 + i);
        const auto bundle = make_bundle(x, masks, 6000 + static_cast<std::uint64_t>(i));
        bool ok = bundle.composite.l == x.l;
        for (std::size_t k = 0; k < kNumComponents && ok; ++k) {
            const auto recoloured = apply_chromatic(x.ab, bundle.refs[k].chromatic);
            for (int y = 0; y < 32 && ok; ++y) {
                for (int xx = 0; xx < 32 && ok; ++xx) {
                    if (masks.at(y, xx) != AugmentationBundle::assignment(k)) {
                        continue;
                    }
                    ok = bundle.composite.ab.at(0, y, xx) == recoloured.at(0, y, xx) &&
                         bundle.composite.ab.at(1, y, xx) == recoloured.at(1, y, xx);
                }
            }
        }
        exact += ok ? 1 : 0;
    }
    return {exact == 100, std::to_string(exact) + "/100 bundles exact"};
}

Outcome flow_correctness()
{
    double worst_inverse = 0.0;
    double worst_inverse_f32 = 0.0;
    double worst_logdet = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ComponentFlow flow(4, 4, 32, 8);
        flow->randomize(7000 + trial);
        torch::manual_seed(8000 + trial);
        const auto z = torch::randn({1, 4});
        const auto ctx = torch::randn({1, 8});
        torch::NoGradGuard no_grad;
        // float32 is reported only: with |w| up to ~90 its ulp is already ~1e-5.
        const auto w32 = flow->forward(z, ctx).first;
        worst_inverse_f32 = std::max(worst_inverse_f32, (flow->inverse(w32, ctx).first - z).abs().max().item<double>());

        flow->to(torch::kFloat64);
        const auto zd = z.to(torch::kFloat64);
        const auto cd = ctx.to(torch::kFloat64);
        const auto [w, logdet] = flow->forward(zd, cd);
        worst_inverse = std::max(worst_inverse, (flow->inverse(w, cd).first - zd).abs().max().item<double>());

        // Five-point central differences.
        const double h = 1e-5;
        auto at = [&](int k, double d) {
            auto zz = zd.clone();
            zz[0][k] += d;
            return flow->forward(zz, cd).first[0];
        };
        auto jac = torch::zeros({4, 4}, torch::kFloat64);
        for (int k = 0; k < 4; ++k) {
            jac.select(1, k).copy_((-at(k, 2 * h) + 8 * at(k, h) - 8 * at(k, -h) + at(k, -2 * h)) / (12 * h));
        }
        const double numeric = std::get<1>(torch::linalg_slogdet(jac)).item<double>();
        const double rel = std::abs(logdet.item<double>() - numeric) / std::max(std::abs(numeric), 1e-12);
        worst_logdet = std::max(worst_logdet, rel);
    }
    return {worst_inverse < kFlowInverseTol && worst_logdet < kFlowLogdetRelTol,
            "max inverse error " + fmt(worst_inverse) + " (float32 " + fmt(worst_inverse_f32) +
                "), max logdet rel. error " + fmt(worst_logdet)};
}

Outcome metric_oracles()
{
    RgbImage gray(32, 32);
    std::mt19937 rng(9);
    std::uniform_int_distribution<int> px(0, 255);
    for (std::size_t i = 0; i < gray.data.size(); i += 3) {
        gray.data[i] = gray.data[i + 1] = gray.data[i + 2] = static_cast<std::uint8_t>(px(rng));
    }
    const double cf = colorfulness(gray);

    RgbImage a(32, 32, 90);
    RgbImage b(32, 32, 100);
    const double p = psnr(a, b);

    RgbImage noise(32, 32);
    for (auto& v : noise.data) {
        v = static_cast<std::uint8_t>(px(rng));
    }
    const double s = ssim(noise, noise);

    std::normal_distribution<double> n;
    std::mt19937_64 r64(10);
    Eigen::MatrixXd feats(500, 8);
    for (int i = 0; i < feats.rows(); ++i) {
        for (int j = 0; j < feats.cols(); ++j) {
            feats(i, j) = n(r64);
        }
    }
    const double fid_same = frechet_distance(feats, feats);
    Eigen::MatrixXd x(100000, 1);
    Eigen::MatrixXd y(100000, 1);
    for (int i = 0; i < x.rows(); ++i) {
        x(i, 0) = n(r64);
        y(i, 0) = n(r64) + 3.0;
    }
    const double fid_shift = frechet_distance(x, y);

    const bool ok = cf == 0.0 && std::abs(p - kPsnrOffsetExpect) <= kPsnrOffsetTol && s == 1.0 &&
                    fid_same < kFrechetIdenticalTol && std::abs(fid_shift - 9.0) <= kFrechetShiftRelTol * 9.0;
    return {ok, "CF(gray) " + fmt(cf) + ", PSNR(offset 10) " + fmt(p) + ", SSIM(identical) " + fmt(s) +
                    ", FD(identical) " + fmt(fid_same) + ", FD(N(0,1), N(3,1)) " + fmt(fid_shift)};
}

Outcome gradient_check()
{
    const auto cfg = desk_config();
    torch::manual_seed(11);
    Colorizer f(cfg.model);
    ColorEncoder g(cfg.model);
    const auto x = test::random_lab(32, 32, 11);
    const auto masks = test::random_masks(32, 32, 11);
    const auto w0 = encode(test::random_lab(32, 32, 12).ab, masks, g);
    f->to(torch::kFloat64);

    const auto l_norm = normalize_l(to_tensor(x.l)).unsqueeze(0).to(torch::kFloat64);
    const auto m = masks_to_tensor(masks).unsqueeze(0).to(torch::kFloat64);
    auto batch = to_batch({w0});
    const auto present = batch.present.to(torch::kFloat64);
    const auto projection = torch::randn({1, 2, 32, 32}, torch::kFloat64);
    auto objective = [&](const torch::Tensor& vectors) {
        return (f->forward(l_norm, {vectors, present}, m) * projection).sum();
    };

    auto v = batch.vectors.to(torch::kFloat64).clone().requires_grad_(true);
    objective(v).backward();
    const auto analytic = v.grad().clone();

    torch::NoGradGuard no_grad;
    const auto base = v.detach();
    auto numeric = torch::zeros_like(base);
    const double h = 1e-5;
    for (long c = 0; c < 5; ++c) {
        for (long k = 0; k < cfg.model.d_w; ++k) {
            auto vp = base.clone();
            auto vm = base.clone();
            vp[0][c][k] += h;
            vm[0][c][k] -= h;
            numeric[0][c][k] = (objective(vp) - objective(vm)) / (2 * h);
        }
    }
    const double rel = (analytic - numeric).norm().item<double>() /
                       std::max(analytic.norm().item<double>(), numeric.norm().item<double>());
    return {rel < kGradRelTol && analytic.abs().max().item<double>() > 0.0,
            "relative error " + fmt(rel) + " over " + std::to_string(5 * cfg.model.d_w) + " coordinates"};
}

// ---------------------------------------------------------------------------
// Training runs are shared between criteria.

struct RunRecord {
    std::string name;
    std::vector<LossReport> reports;
    bool round_trip = false;
    bool identity = false;
    bool finite = false;
    double seconds = 0.0;
};

bool identity_holds(const LossReport& r, const LossWeights& lw)
{
    const double expect = r.adv + lw.alpha * r.l1 + lw.beta * r.perc + lw.gamma * r.cyc;
    return r.total == expect && std::abs(r.objective - expect) <= kObjectiveRelTol * std::max(1.0, std::abs(expect));
}

RunRecord training_run(const std::string& name, const TrainConfig& cfg, const Dataset& data, int steps,
                       Trainer** keep = nullptr)
{
    RunRecord rec;
    rec.name = name;
    static std::vector<std::unique_ptr<Trainer>> alive;
    alive.push_back(std::make_unique<Trainer>(cfg, data));
    Trainer& t = *alive.back();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        rec.reports = t.run(steps);
    } catch (const std::exception& e) {
        std::printf("  [%s] training aborted: %s\n", name.c_str(), e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.finite = static_cast<int>(rec.reports.size()) == steps;
    rec.identity = !rec.reports.empty();
    for (const auto& r : rec.reports) {
        rec.finite = rec.finite && std::isfinite(r.total) && std::isfinite(r.disc) && std::isfinite(r.objective);
        rec.identity = rec.identity && identity_holds(r, cfg.loss);
    }
    test::TempDir dir;
    const auto path = dir / "run.pt";
    const auto snapshot = t.checkpoint();
    save_checkpoint(snapshot, path);
    rec.round_trip = same_state(load_checkpoint(path), snapshot);
    if (keep != nullptr) {
        *keep = &t;
    }
    return rec;
}

std::vector<RunRecord>& runs()
{
    static std::vector<RunRecord> all;
    return all;
}

Outcome smoke_training()
{
    const auto cfg = [] {
        auto c = desk_config();
        c.max_steps = kSmokeSteps;
        return c;
    }();
    const auto data = load_dataset(cfg);
    auto main = training_run("smoke", cfg, data, kSmokeSteps);
    double early = 0.0;
    double late = 0.0;
    bool enough = main.reports.size() == static_cast<std::size_t>(kSmokeSteps);
    if (enough) {
        for (int i = 0; i < 10; ++i) {
            early += main.reports[static_cast<std::size_t>(i)].l1 / 10.0;
            late += main.reports[static_cast<std::size_t>(kSmokeSteps - 10 + i)].l1 / 10.0;
        }
    }
    std::ostringstream detail;
    detail << "data " << data.size() << " batch " << cfg.batch_main << " lr " << cfg.lr_main << "; l1 steps 1-10 "
           << fmt(early) << " -> steps 191-200 " << fmt(late) << " (ratio " << fmt(late / early) << ", "
           << fmt(main.seconds) << " s)";
    bool ok = enough && main.finite && late <= kSmokeL1Ratio * early;
    runs().push_back(main);

    const std::vector<std::pair<std::string, std::function<void(TrainConfig&)>>> ablations{
        {"grouped_design=off", [](TrainConfig& c) { c.model.grouped_design = false; }},
        {"chromatic_aug=off", [](TrainConfig& c) { c.augment.chromatic = false; }},
        {"spatial_aug=off", [](TrainConfig& c) { c.augment.spatial = false; }},
        {"repr_branch=off", [](TrainConfig& c) { c.model.repr_branch = false; }},
    };
    for (const auto& [name, apply] : ablations) {
        auto c = cfg;
        apply(c);
        auto rec = training_run(name, c, data, kSmokeSteps);
        ok = ok && rec.finite;
        detail << "; " << name << (rec.finite ? " ok" : " FAILED") << " (l1 " << fmt(rec.reports.empty() ? NAN : rec.reports.back().l1)
               << ")";
        runs().push_back(std::move(rec));
    }
    return {ok, detail.str()};
}

Outcome component_locality()
{
    auto cfg = desk_config();
    cfg.max_steps = kLocalitySteps;
    const auto data = load_dataset(cfg);
    Trainer* t = nullptr;
    auto rec = training_run("locality", cfg, data, kLocalitySteps, &t);
    const bool trained = rec.finite;
    runs().push_back(rec);
    if (!trained) {
        return {false, "training did not complete"};
    }
    auto& m = t->models();
    m.g->eval();
    m.f->eval();
    double inside = 0.0;
    double outside = 0.0;
    for (int p = 0; p < kLocalityPairs; ++p) {
        const auto& a = data[static_cast<std::size_t>(p) % data.size()];
        const auto& b = data[static_cast<std::size_t>(p * 7 + 3) % data.size()];
        const auto wa = encode(a.image.ab, a.masks, m.g);
        const auto wb = encode(b.image.ab, b.masks, m.g);
        auto swapped = wa;
        swapped.vectors[0] = wb.vectors[0];
        swapped.present[0] = wb.present[0];
        const auto o1 = generate(a.image.l, wa, a.masks, m.f);
        const auto o2 = generate(a.image.l, swapped, a.masks, m.f);
        const auto lips = a.masks.mask(Component::lips);
        const auto dilated = dilate(lips, a.masks.height(), a.masks.width(), kLocalityRadius);
        const std::size_t n = lips.size();
        double in = 0.0;
        double out = 0.0;
        int n_in = 0;
        int n_out = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = 0.5 * (std::abs(o1.ab.values[i] - o2.ab.values[i]) +
                                    std::abs(o1.ab.values[i + n] - o2.ab.values[i + n]));
            if (lips[i] != 0) {
                in += d;
                ++n_in;
            }
            if (dilated[i] == 0) {
                out += d;
                ++n_out;
            }
        }
        inside += in / std::max(n_in, 1) / kLocalityPairs;
        outside += out / std::max(n_out, 1) / kLocalityPairs;
    }
    const double ratio = outside / inside;
    return {ratio < kLocalityRatio, "mean |dab| inside " + fmt(inside) + ", outside dilated(r=" +
                                        std::to_string(kLocalityRadius) + ") " + fmt(outside) + ", ratio " +
                                        fmt(ratio) + " after " + std::to_string(kLocalitySteps) + " steps"};
}

Outcome identity_and_round_trip()
{
    if (runs().empty()) {
        return {false, "no training runs were executed (select smoke and/or locality)"};
    }
    bool ok = true;
    std::string detail;
    for (const auto& r : runs()) {
        ok = ok && r.identity && r.round_trip;
        detail += (detail.empty() ? "" : "; ") + r.name + ": identity " + (r.identity ? "ok" : "FAILED") +
                  ", round trip " + (r.round_trip ? "ok" : "FAILED");
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv)
{
    torch::set_num_threads(1);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"grouped-isolation", grouped_isolation},
        {"l-preservation", l_preservation},
        {"composite-exactness", composite_exactness},
        {"flow", flow_correctness},
        {"metrics", metric_oracles},
        {"gradient", gradient_check},
        {"smoke", smoke_training},
        {"locality", component_locality},
        {"identity-roundtrip", identity_and_round_trip},
    };
    std::set<std::string> selected(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (!selected.empty() && selected.count(name) == 0) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %-20s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
