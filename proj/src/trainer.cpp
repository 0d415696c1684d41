#include "fcnet/trainer.hpp"

#include "fcnet/augment.hpp"
#include "fcnet/error.hpp"
#include "fcnet/random.hpp"
#include "fcnet/tensors.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace fcnet {
namespace {

constexpr std::uint64_t kBundleStream = 0xB0D1E5ULL;
constexpr std::uint64_t kFlowStream = 0xF10ULL;
constexpr std::uint64_t kAutoStream = 0xA070ULL;

std::string serialize(const torch::optim::Optimizer& optimizer)
{
    torch::serialize::OutputArchive archive;
    optimizer.save(archive);
    std::ostringstream out;
    archive.save_to(out);
    return out.str();
}

void deserialize(torch::optim::Optimizer& optimizer, const std::string& bytes)
{
    std::istringstream in(bytes);
    torch::serialize::InputArchive archive;
    archive.load_from(in);
    optimizer.load(archive);
}

torch::optim::AdamOptions adam_options(const TrainConfig& config, double lr)
{
    return torch::optim::AdamOptions(lr).betas({config.adam_beta1, config.adam_beta2});
}

std::int64_t steps_for(int epochs, std::size_t n, int batch)
{
    const auto per_epoch = static_cast<std::int64_t>((n + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
    return static_cast<std::int64_t>(epochs) * per_epoch;
}

struct ImageBatch {
    torch::Tensor l_norm; // [B,1,H,W]
    torch::Tensor ab;     // [B,2,H,W], Lab units
    torch::Tensor masks;  // [B,5,H,W]
};

ImageBatch collate(const Dataset& dataset, const std::vector<std::size_t>& indices)
{
    std::vector<torch::Tensor> l;
    std::vector<torch::Tensor> ab;
    std::vector<torch::Tensor> masks;
    for (auto i : indices) {
        const auto& s = dataset[i];
        l.push_back(to_tensor(s.image.l));
        ab.push_back(to_tensor(s.image.ab));
        masks.push_back(masks_to_tensor(s.masks));
    }
    return {normalize_l(torch::stack(l)), torch::stack(ab), torch::stack(masks)};
}

std::vector<std::size_t> indices_of(const std::vector<PlannedSample>& plan)
{
    std::vector<std::size_t> out;
    out.reserve(plan.size());
    for (const auto& p : plan) {
        out.push_back(p.index);
    }
    return out;
}

std::vector<double> to_doubles(const torch::Tensor& t)
{
    const auto c = t.detach().to(torch::kFloat64).contiguous();
    return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

void append_line(const std::filesystem::path& path, const nlohmann::json& record)
{
    if (path.empty()) {
        return;
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw IoError("cannot append to training log '" + path.string() + "'");
    }
    out << record.dump() << '\n';
}

void emit(const TrainOptions& options, const nlohmann::json& record)
{
    append_line(options.log_path, record);
    if (options.on_record) {
        options.on_record(record);
    }
}

std::vector<std::vector<std::size_t>> chunks(std::size_t n, std::size_t size)
{
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t begin = 0; begin < n; begin += size) {
        std::vector<std::size_t> chunk(std::min(size, n - begin));
        std::iota(chunk.begin(), chunk.end(), begin);
        out.push_back(std::move(chunk));
    }
    return out;
}

} // namespace

std::string_view to_string(SupervisionSource source) noexcept
{
    switch (source) {
    case SupervisionSource::original: return "original";
    case SupervisionSource::augmented: return "augmented";
    case SupervisionSource::composite: return "composite";
    }
    return "unknown";
}

nlohmann::json LossReport::to_json() const
{
    nlohmann::json j{{"step", step}, {"adv", adv},   {"l1", l1},       {"perc", perc},
                     {"cyc", cyc},   {"total", total}, {"objective", objective}, {"disc", disc}};
    for (std::size_t s = 0; s < kNumSources; ++s) {
        const auto& b = sources[s];
        j["sources"][std::string(to_string(static_cast<SupervisionSource>(s)))] = {
            {"adv", b.adv}, {"l1", b.l1}, {"perc", b.perc}, {"cyc", b.cyc}, {"total", b.total}, {"samples", b.samples}};
    }
    return j;
}

BatchPlanner::BatchPlanner(std::size_t dataset_size, std::uint64_t seed) : size_(dataset_size), seed_(seed)
{
    if (dataset_size == 0) {
        throw InvalidArgument("cannot plan batches over an empty dataset");
    }
}

const std::vector<std::size_t>& BatchPlanner::permutation(std::int64_t epoch)
{
    if (epoch != cached_epoch_) {
        perm_.resize(size_);
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        std::mt19937_64 rng(mix_seed(seed_, static_cast<std::uint64_t>(epoch)));
        std::shuffle(perm_.begin(), perm_.end(), rng);
        cached_epoch_ = epoch;
    }
    return perm_;
}

std::vector<PlannedSample> BatchPlanner::plan(std::int64_t step, int batch)
{
    std::vector<PlannedSample> out;
    out.reserve(static_cast<std::size_t>(batch));
    const auto n = static_cast<std::int64_t>(size_);
    for (int b = 0; b < batch; ++b) {
        const std::int64_t k = step * batch + b;
        PlannedSample p;
        p.index = permutation(k / n)[static_cast<std::size_t>(k % n)];
        p.source = static_cast<SupervisionSource>(k % 3);
        p.ref = static_cast<int>((k / 3) % static_cast<std::int64_t>(kNumComponents));
        p.bundle_seed = mix_seed(seed_ ^ kBundleStream, static_cast<std::uint64_t>(k));
        out.push_back(p);
    }
    return out;
}

Trainer::Trainer(TrainConfig config, const Dataset& dataset)
    : config_(std::move(config)), dataset_(dataset), planner_(dataset.size(), config_.seed)
{
    config_.validate();
    models_ = Models::create(config_.model, config_.seed);
    extractor_ = make_extractor(config_.perceptual);
    init_optimizers();
}

Trainer::Trainer(Checkpoint checkpoint, const Dataset& dataset)
    : config_(std::move(checkpoint.config)), dataset_(dataset), models_(checkpoint.models),
      planner_(dataset.size(), config_.seed), step_(checkpoint.step)
{
    extractor_ = make_extractor(config_.perceptual);
    init_optimizers();
    if (auto it = checkpoint.optimizer_states.find("main"); it != checkpoint.optimizer_states.end()) {
        deserialize(*opt_main_, it->second);
    }
    if (auto it = checkpoint.optimizer_states.find("disc"); it != checkpoint.optimizer_states.end()) {
        deserialize(*opt_disc_, it->second);
    }
}

void Trainer::init_optimizers()
{
    auto params = models_.g->parameters();
    const auto f_params = models_.f->parameters();
    params.insert(params.end(), f_params.begin(), f_params.end());
    opt_main_ = std::make_unique<torch::optim::Adam>(params, adam_options(config_, config_.lr_main));
    opt_disc_ = std::make_unique<torch::optim::Adam>(models_.d->parameters(), adam_options(config_, config_.lr_main));
}

std::int64_t Trainer::planned_steps() const
{
    return config_.max_steps > 0 ? config_.max_steps : steps_for(config_.epochs, dataset_.size(), config_.batch_main);
}

LossReport Trainer::step()
{
    const auto plan = planner_.plan(step_, config_.batch_main);
    const long batch = static_cast<long>(plan.size());

    std::vector<torch::Tensor> in_l;
    std::vector<torch::Tensor> in_masks;
    std::vector<torch::Tensor> target_ab;
    std::vector<torch::Tensor> enc_ab;
    std::vector<torch::Tensor> enc_masks;
    std::array<std::vector<long>, kNumComponents> enc_index;
    auto add_encoding = [&](const LabImage& img, const ComponentMasks& m) {
        enc_ab.push_back(to_tensor(img.ab));
        enc_masks.push_back(masks_to_tensor(m));
        return static_cast<long>(enc_ab.size()) - 1;
    };
    auto add_input = [&](const Planes& l, const ComponentMasks& m, const Planes& ab) {
        in_l.push_back(to_tensor(l));
        in_masks.push_back(masks_to_tensor(m));
        target_ab.push_back(to_tensor(ab));
    };

    for (const auto& p : plan) {
        const Sample& x = dataset_[p.index];
        switch (p.source) {
        case SupervisionSource::original: {
            const long e = add_encoding(x.image, x.masks);
            for (auto& idx : enc_index) {
                idx.push_back(e);
            }
            add_input(x.image.l, x.masks, x.image.ab);
            break;
        }
        case SupervisionSource::augmented: {
            const auto [chroma, warp] = sample_transforms(p.bundle_seed, static_cast<std::size_t>(p.ref), config_.augment);
            const auto [ref, ref_masks] = apply_spatial(assemble(x.image.l, apply_chromatic(x.image.ab, chroma)), x.masks, warp);
            const long e = add_encoding(ref, ref_masks);
            for (auto& idx : enc_index) {
                idx.push_back(e);
            }
            add_input(ref.l, ref_masks, ref.ab);
            break;
        }
        case SupervisionSource::composite: {
            const auto bundle = make_bundle(x.image, x.masks, p.bundle_seed, config_.augment);
            for (std::size_t c = 0; c < kNumComponents; ++c) {
                enc_index[c].push_back(add_encoding(bundle.refs[c].image, bundle.refs[c].masks));
            }
            add_input(x.image.l, x.masks, bundle.composite.ab);
            break;
        }
        }
    }

    const auto l = torch::stack(in_l);
    const auto l_norm = normalize_l(l);
    const auto masks = torch::stack(in_masks);
    const auto target = torch::stack(target_ab);

    RepresentationBatch w;
    if (config_.model.repr_branch) {
        const auto all = models_.g->forward(normalize_ab(torch::stack(enc_ab)), torch::stack(enc_masks));
        std::vector<torch::Tensor> vectors;
        std::vector<torch::Tensor> present;
        for (std::size_t c = 0; c < kNumComponents; ++c) {
            const auto idx = torch::tensor(enc_index[c], torch::kLong);
            const auto ci = static_cast<long>(c);
            vectors.push_back(all.vectors.select(1, ci).index_select(0, idx));
            present.push_back(all.present.select(1, ci).index_select(0, idx));
        }
        w = {torch::stack(vectors, 1), torch::stack(present, 1)};
    } else {
        w = {torch::zeros({batch, static_cast<long>(kNumComponents), config_.model.d_w}),
             torch::zeros({batch, static_cast<long>(kNumComponents)})};
    }

    // Generator step.
    const auto ab_pred = models_.f->forward(l_norm, w, masks);
    const auto adv_ps =
        adversarial_per_sample({}, models_.d->forward(l_norm, normalize_ab(ab_pred)), AdversarialSide::generator);
    const auto l1_ps = l1_per_sample(ab_pred, target);
    auto perc_ps = torch::zeros({batch});
    if (extractor_) {
        perc_ps = perceptual_per_sample(lab_to_rgb_tensor(l, ab_pred), lab_to_rgb_tensor(l, target), *extractor_);
    }
    auto cyc_ps = torch::zeros({batch});
    if (config_.model.repr_branch) {
        const auto reencoded = models_.g->forward(normalize_ab(ab_pred), masks);
        cyc_ps = cycle_per_sample(reencoded, {w.vectors.detach(), w.present});
    }

    const auto& lw = config_.loss;
    const auto adv = adv_ps.mean().to(torch::kFloat64);
    const auto l1 = l1_ps.mean().to(torch::kFloat64);
    const auto perc = perc_ps.mean().to(torch::kFloat64);
    const auto cyc = cyc_ps.mean().to(torch::kFloat64);
    const auto objective = adv + lw.alpha * l1 + lw.beta * perc + lw.gamma * cyc;

    LossReport report;
    report.step = step_ + 1;
    report.adv = adv.item<double>();
    report.l1 = l1.item<double>();
    report.perc = perc.item<double>();
    report.cyc = cyc.item<double>();
    report.total = report.adv + lw.alpha * report.l1 + lw.beta * report.perc + lw.gamma * report.cyc;
    report.objective = objective.item<double>();

    const auto adv_v = to_doubles(adv_ps);
    const auto l1_v = to_doubles(l1_ps);
    const auto perc_v = to_doubles(perc_ps);
    const auto cyc_v = to_doubles(cyc_ps);
    for (long b = 0; b < batch; ++b) {
        auto& s = report.sources[static_cast<std::size_t>(plan[static_cast<std::size_t>(b)].source)];
        s.adv += adv_v[static_cast<std::size_t>(b)];
        s.l1 += l1_v[static_cast<std::size_t>(b)];
        s.perc += perc_v[static_cast<std::size_t>(b)];
        s.cyc += cyc_v[static_cast<std::size_t>(b)];
        ++s.samples;
    }
    for (auto& s : report.sources) {
        if (s.samples > 0) {
            s.adv /= s.samples;
            s.l1 /= s.samples;
            s.perc /= s.samples;
            s.cyc /= s.samples;
            s.total = s.adv + lw.alpha * s.l1 + lw.beta * s.perc + lw.gamma * s.cyc;
        }
    }

    auto abort_non_finite = [&](const char* what) {
        nlohmann::json dump = report.to_json();
        dump["failed"] = what;
        for (const auto& p : plan) {
            dump["samples"].push_back({{"name", dataset_[p.index].name},
                                       {"source", to_string(p.source)},
                                       {"ref", p.ref},
                                       {"bundle_seed", p.bundle_seed}});
        }
        const auto path = dump_dir_ / ("fcnet_nonfinite_step" + std::to_string(report.step) + ".json");
        std::ofstream(path) << dump.dump(2) << '\n';
        throw NumericError(std::string("non-finite ") + what + " at step " + std::to_string(report.step) +
                           "; diagnostics in " + path.string());
    };
    if (!std::isfinite(report.objective)) {
        abort_non_finite("generator loss");
    }

    opt_main_->zero_grad();
    objective.backward();
    opt_main_->step();

    // Discriminator step.
    opt_disc_->zero_grad();
    const auto real_logits = models_.d->forward(l_norm, normalize_ab(target));
    const auto fake_logits = models_.d->forward(l_norm, normalize_ab(ab_pred.detach()));
    const auto d_loss = adversarial_per_sample(real_logits, fake_logits, AdversarialSide::discriminator).mean();
    report.disc = d_loss.item<double>();
    if (!std::isfinite(report.disc)) {
        abort_non_finite("discriminator loss");
    }
    d_loss.backward();
    opt_disc_->step();

    ++step_;
    return report;
}

std::vector<LossReport> Trainer::run(std::int64_t steps, const TrainOptions& options)
{
    dump_dir_ = options.dump_dir;
    std::vector<LossReport> reports;
    reports.reserve(static_cast<std::size_t>(std::max<std::int64_t>(steps, 0)));
    for (std::int64_t i = 0; i < steps; ++i) {
        reports.push_back(step());
        const bool last = i + 1 == steps;
        if (last || (config_.log_every > 0 && reports.back().step % config_.log_every == 0)) {
            emit(options, reports.back().to_json());
        }
        if (!options.checkpoint_path.empty() &&
            (last || (options.checkpoint_every > 0 && reports.back().step % options.checkpoint_every == 0))) {
            save_checkpoint(checkpoint(), options.checkpoint_path);
        }
    }
    return reports;
}

Checkpoint Trainer::checkpoint() const
{
    Checkpoint c;
    c.config = config_;
    c.step = step_;
    c.models = models_;
    c.optimizer_states["main"] = serialize(*opt_main_);
    c.optimizer_states["disc"] = serialize(*opt_disc_);
    return c;
}

Checkpoint train(const TrainConfig& config, const Dataset& dataset, const TrainOptions& options)
{
    Trainer trainer(config, dataset);
    trainer.run(trainer.planned_steps(), options);
    return trainer.checkpoint();
}

Checkpoint train_flow(Checkpoint main, const Dataset& dataset, std::int64_t steps, const TrainOptions& options,
                      std::vector<AuxReport>* history)
{
    if (main.models.g.is_empty()) {
        throw ModelStateError("flow training needs a main checkpoint with a trained g");
    }
    const auto& config = main.config;
    if (main.models.flow.is_empty()) {
        torch::manual_seed(mix_seed(config.seed, kFlowStream));
        main.models.flow = FlowSet(config.model);
    }
    auto flows = main.models.flow;
    auto g = main.models.g;
    torch::optim::Adam optimizer(flows->parameters(), adam_options(config, config.lr_aux));
    if (auto it = main.optimizer_states.find("flow"); it != main.optimizer_states.end()) {
        deserialize(optimizer, it->second);
    }
    if (steps <= 0) {
        steps = steps_for(config.epochs, dataset.size(), config.batch_aux);
    }
    BatchPlanner planner(dataset.size(), mix_seed(config.seed, kFlowStream));
    for (std::int64_t s = 0; s < steps; ++s) {
        const auto batch = collate(dataset, indices_of(planner.plan(s, config.batch_aux)));
        RepresentationBatch teacher;
        {
            torch::NoGradGuard no_grad;
            teacher = g->forward(normalize_ab(batch.ab), batch.masks);
        }
        auto total = torch::zeros({});
        auto count = torch::zeros({});
        for (auto c : kAllComponents) {
            const auto ci = static_cast<long>(index_of(c));
            const auto weight = teacher.present.select(1, ci);
            total = total + (flows->nll(c, teacher.vectors.select(1, ci), batch.l_norm, batch.masks) * weight).sum();
            count = count + weight.sum();
        }
        const auto loss = total / count.clamp_min(1.0);
        const double value = loss.item<double>();
        if (!std::isfinite(value)) {
            throw NumericError("non-finite flow NLL at step " + std::to_string(s + 1));
        }
        optimizer.zero_grad();
        loss.backward();
        optimizer.step();
        AuxReport r{s + 1, value, 0.0, 0.0};
        if (history != nullptr) {
            history->push_back(r);
        }
        if (s + 1 == steps || (config.log_every > 0 && (s + 1) % config.log_every == 0)) {
            emit(options, {{"stage", "flow"}, {"step", r.step}, {"nll", r.loss}});
        }
    }
    flows->set_trained(true);
    main.optimizer_states["flow"] = serialize(optimizer);
    if (!options.checkpoint_path.empty()) {
        save_checkpoint(main, options.checkpoint_path);
    }
    return main;
}

Checkpoint train_auto(Checkpoint main, const Dataset& dataset, std::int64_t steps, const TrainOptions& options,
                      std::vector<AuxReport>* history)
{
    if (main.models.g.is_empty() || main.models.f.is_empty()) {
        throw ModelStateError("automatic-head training needs a main checkpoint with g and f");
    }
    const auto& config = main.config;
    if (main.models.auto_head.is_empty()) {
        torch::manual_seed(mix_seed(config.seed, kAutoStream));
        main.models.auto_head = AutoHead(config.model);
    }
    auto head = main.models.auto_head;
    auto g = main.models.g;
    auto f = main.models.f;
    torch::optim::Adam optimizer(head->parameters(), adam_options(config, config.lr_aux));
    if (auto it = main.optimizer_states.find("auto"); it != main.optimizer_states.end()) {
        deserialize(optimizer, it->second);
    }
    if (steps <= 0) {
        steps = steps_for(config.epochs, dataset.size(), config.batch_aux);
    }

    std::vector<bool> f_requires;
    for (auto& p : f->parameters()) {
        f_requires.push_back(p.requires_grad());
        p.set_requires_grad(false);
    }
    BatchPlanner planner(dataset.size(), mix_seed(config.seed, kAutoStream));
    for (std::int64_t s = 0; s < steps; ++s) {
        const auto batch = collate(dataset, indices_of(planner.plan(s, config.batch_aux)));
        RepresentationBatch teacher;
        {
            torch::NoGradGuard no_grad;
            teacher = g->forward(normalize_ab(batch.ab), batch.masks);
        }
        const auto predicted = head->forward(batch.l_norm, batch.masks);
        const auto w_l1 = ((predicted.vectors - teacher.vectors).abs().mean(2) * teacher.present).sum() /
                          teacher.present.sum().clamp_min(1.0);
        const auto ab_pred = f->forward(batch.l_norm, predicted, batch.masks);
        const auto image_l1 = (normalize_ab(ab_pred) - normalize_ab(batch.ab)).abs().mean();
        const auto loss = w_l1 + config.loss.auto_image * image_l1;
        const double value = loss.item<double>();
        if (!std::isfinite(value)) {
            throw NumericError("non-finite automatic-head loss at step " + std::to_string(s + 1));
        }
        optimizer.zero_grad();
        loss.backward();
        optimizer.step();
        AuxReport r{s + 1, value, w_l1.item<double>(), image_l1.item<double>()};
        if (history != nullptr) {
            history->push_back(r);
        }
        if (s + 1 == steps || (config.log_every > 0 && (s + 1) % config.log_every == 0)) {
            emit(options, {{"stage", "auto"}, {"step", r.step}, {"loss", r.loss}, {"w_l1", r.w_l1}, {"image_l1", r.image_l1}});
        }
    }
    std::size_t i = 0;
    for (auto& p : f->parameters()) {
        p.set_requires_grad(f_requires[i++]);
    }
    main.optimizer_states["auto"] = serialize(optimizer);
    if (!options.checkpoint_path.empty()) {
        save_checkpoint(main, options.checkpoint_path);
    }
    return main;
}

double mean_flow_nll(FlowSet& flows, ColorEncoder& g, const Dataset& dataset)
{
    torch::NoGradGuard no_grad;
    double total = 0.0;
    double count = 0.0;
    for (const auto& chunk : chunks(dataset.size(), 16)) {
        const auto batch = collate(dataset, chunk);
        const auto teacher = g->forward(normalize_ab(batch.ab), batch.masks);
        for (auto c : kAllComponents) {
            const auto ci = static_cast<long>(index_of(c));
            const auto weight = teacher.present.select(1, ci);
            total += (flows->nll(c, teacher.vectors.select(1, ci), batch.l_norm, batch.masks) * weight).sum().item<double>();
            count += weight.sum().item<double>();
        }
    }
    return count > 0.0 ? total / count : 0.0;
}

double mean_auto_w_l1(AutoHead& head, ColorEncoder& g, const Dataset& dataset)
{
    torch::NoGradGuard no_grad;
    double total = 0.0;
    double count = 0.0;
    for (const auto& chunk : chunks(dataset.size(), 16)) {
        const auto batch = collate(dataset, chunk);
        const auto teacher = g->forward(normalize_ab(batch.ab), batch.masks);
        const auto predicted = head->forward(batch.l_norm, batch.masks);
        total += ((predicted.vectors - teacher.vectors).abs().mean(2) * teacher.present).sum().item<double>();
        count += teacher.present.sum().item<double>();
    }
    return count > 0.0 ? total / count : 0.0;
}

} // namespace fcnet
