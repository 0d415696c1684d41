#include "fcnet/checkpoint.hpp"
#include "fcnet/dataset.hpp"
#include "fcnet/error.hpp"
#include "fcnet/trainer.hpp"
#include "support/support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

using namespace fcnet;
using Catch::Approx;

namespace {

Dataset tiny_data(const TrainConfig& cfg)
{
    return Dataset::synthetic(cfg.synthetic_count, cfg.image_size, cfg.synthetic_seed, LabelMapping::celebamask19());
}

void check_identity(const LossReport& r, const LossWeights& lw)
{
    const double expect = r.adv + lw.alpha * r.l1 + lw.beta * r.perc + lw.gamma * r.cyc;
    CHECK(r.total == expect);
    CHECK(r.objective == Approx(expect).epsilon(1e-12).margin(1e-12));
    double l1 = 0.0;
    int samples = 0;
    for (const auto& s : r.sources) {
        l1 += s.l1 * s.samples;
        samples += s.samples;
        if (s.samples > 0) {
            CHECK(s.total == s.adv + lw.alpha * s.l1 + lw.beta * s.perc + lw.gamma * s.cyc);
        }
    }
    CHECK(l1 / samples == Approx(r.l1).epsilon(1e-5));
}

std::vector<torch::Tensor> snapshot(torch::nn::Module& m)
{
    std::vector<torch::Tensor> out;
    for (const auto& p : m.parameters()) {
        out.push_back(p.detach().clone());
    }
    return out;
}

bool unchanged(torch::nn::Module& m, const std::vector<torch::Tensor>& before)
{
    const auto now = m.parameters();
    for (std::size_t i = 0; i < now.size(); ++i) {
        if (!torch::equal(now[i], before[i])) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("first step is finite and satisfies the loss identity", "[training]")
{
    const auto cfg = test::tiny_config();
    const auto data = tiny_data(cfg);
    Trainer t(cfg, data);
    for (int i = 0; i < 3; ++i) {
        const auto r = t.step();
        CHECK(r.step == i + 1);
        CHECK(std::isfinite(r.total));
        CHECK(std::isfinite(r.disc));
        check_identity(r, cfg.loss);
    }
    CHECK(t.current_step() == 3);
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run", "[training]")
{
    const auto cfg = test::tiny_config();
    const auto data = tiny_data(cfg);
    test::TempDir dir;

    Trainer straight(cfg, data);
    straight.run(4);

    Trainer first(cfg, data);
    first.run(2, {.checkpoint_path = dir / "half.pt"});
    const auto loaded = load_checkpoint(dir / "half.pt");
    CHECK(loaded.step == 2);
    CHECK(same_state(loaded, first.checkpoint()));
    Trainer resumed(loaded, data);
    resumed.run(2);
    CHECK(same_state(straight.checkpoint(), resumed.checkpoint()));
}

TEST_CASE("ablation switches train", "[training]")
{
    const auto data = tiny_data(test::tiny_config());
    for (int which = 0; which < 4; ++which) {
        auto cfg = test::tiny_config();
        switch (which) {
        case 0: cfg.model.grouped_design = false; break;
        case 1: cfg.augment.chromatic = false; break;
        case 2: cfg.augment.spatial = false; break;
        case 3: cfg.model.repr_branch = false; break;
        }
        Trainer t(cfg, data);
        const auto reports = t.run(2);
        REQUIRE(reports.size() == 2);
        for (const auto& r : reports) {
            CHECK(std::isfinite(r.total));
            check_identity(r, cfg.loss);
        }
        if (which == 3) {
            CHECK(reports.back().cyc == 0.0);
        }
    }
}

TEST_CASE("non-finite loss writes a diagnostic and aborts", "[training]")
{
    const auto cfg = test::tiny_config();
    const auto data = tiny_data(cfg);
    test::TempDir dir;
    Trainer t(cfg, data);
    {
        torch::NoGradGuard no_grad;
        t.models().f->parameters().front().fill_(std::numeric_limits<float>::quiet_NaN());
    }
    CHECK_THROWS_AS(t.run(1, {.dump_dir = dir.path()}), NumericError);
    const auto dump = dir / "fcnet_nonfinite_step1.json";
    REQUIRE(std::filesystem::exists(dump));
    const auto j = nlohmann::json::parse(std::ifstream(dump));
    CHECK(j["failed"] == "generator loss");
    CHECK(j["samples"].size() == static_cast<std::size_t>(cfg.batch_main));
}

TEST_CASE("training log is one JSON record per logged step", "[training]")
{
    auto cfg = test::tiny_config();
    cfg.log_every = 2;
    const auto data = tiny_data(cfg);
    test::TempDir dir;
    int seen = 0;
    Trainer t(cfg, data);
    t.run(3, {.log_path = dir / "log.jsonl", .on_record = [&](const nlohmann::json&) { ++seen; }});
    std::ifstream in(dir / "log.jsonl");
    std::vector<nlohmann::json> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(lines.size() == 2);
    CHECK(seen == 2);
    CHECK(lines[0]["step"] == 2);
    CHECK(lines[1]["step"] == 3);
    for (const char* key : {"adv", "l1", "perc", "cyc", "total", "objective", "disc", "sources"}) {
        CHECK(lines[1].contains(key));
    }
}

TEST_CASE("batch planner is a pure function of the step", "[training]")
{
    BatchPlanner a(10, 3);
    BatchPlanner b(10, 3);
    b.plan(40, 2);
    std::set<std::size_t> epoch0;
    for (std::int64_t step = 0; step < 5; ++step) {
        const auto pa = a.plan(step, 2);
        const auto pb = b.plan(step, 2);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i].index == pb[i].index);
            CHECK(pa[i].bundle_seed == pb[i].bundle_seed);
            const auto k = step * 2 + static_cast<std::int64_t>(i);
            CHECK(static_cast<int>(pa[i].source) == k % 3);
            CHECK(pa[i].ref == (k / 3) % 5);
            epoch0.insert(pa[i].index);
        }
    }
    CHECK(epoch0.size() == 10);
    CHECK_THROWS_AS(BatchPlanner(0, 1), InvalidArgument);
}

TEST_CASE("planned steps follow max_steps or epochs", "[training]")
{
    auto cfg = test::tiny_config();
    const auto data = tiny_data(cfg);
    CHECK(Trainer(cfg, data).planned_steps() == 2);
    cfg.max_steps = 0;
    cfg.epochs = 3;
    cfg.batch_main = 3;
    CHECK(Trainer(cfg, data).planned_steps() == 9);
}

TEST_CASE("auxiliary stages leave g and f frozen", "[training]")
{
    const auto cfg = test::tiny_config();
    const auto data = tiny_data(cfg);
    Trainer t(cfg, data);
    t.run(1);
    auto main = t.checkpoint();
    const auto g_before = snapshot(*main.models.g);
    const auto f_before = snapshot(*main.models.f);

    std::vector<AuxReport> flow_hist;
    auto with_flow = train_flow(main, data, 2, {}, &flow_hist);
    REQUIRE(flow_hist.size() == 2);
    CHECK(std::isfinite(flow_hist.back().loss));
    CHECK(with_flow.models.flow->trained());
    CHECK(unchanged(*with_flow.models.g, g_before));
    CHECK(unchanged(*with_flow.models.f, f_before));

    std::vector<AuxReport> auto_hist;
    auto with_auto = train_auto(with_flow, data, 2, {}, &auto_hist);
    REQUIRE(auto_hist.size() == 2);
    CHECK(std::isfinite(auto_hist.back().w_l1));
    CHECK(with_auto.models.auto_head);
    CHECK(unchanged(*with_auto.models.g, g_before));
    CHECK(unchanged(*with_auto.models.f, f_before));
    CHECK(std::isfinite(mean_flow_nll(with_auto.models.flow, with_auto.models.g, data)));
    CHECK(std::isfinite(mean_auto_w_l1(with_auto.models.auto_head, with_auto.models.g, data)));

    Checkpoint empty;
    empty.config = cfg;
    CHECK_THROWS_AS(train_flow(empty, data, 1), ModelStateError);
}

TEST_CASE("auxiliary defaults: lr and batch", "[training]")
{
    const TrainConfig defaults;
    CHECK(defaults.lr_aux == 1e-3);
    CHECK(defaults.batch_aux == 16);
    CHECK(defaults.lr_main == 5e-5);
    CHECK(defaults.batch_main == 4);
    CHECK(defaults.adam_beta1 == 0.5);
    CHECK(defaults.adam_beta2 == 0.999);
}
