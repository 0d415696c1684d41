#pragma once

#include "fcnet/checkpoint.hpp"
#include "fcnet/config.hpp"
#include "fcnet/dataset.hpp"
#include "fcnet/losses.hpp"

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

namespace fcnet {

/// What a training sample is supervised with.
///  original:   refs are five copies of x, target x
///  augmented:  every ref is x_ref^i, input and target are x_ref^i
///  composite:  ref i supplies component i, target is the composite
enum class SupervisionSource : int { original = 0, augmented = 1, composite = 2 };
inline constexpr std::size_t kNumSources = 3;

std::string_view to_string(SupervisionSource source) noexcept;

struct SourceBreakdown {
    double adv = 0.0;
    double l1 = 0.0;
    double perc = 0.0;
    double cyc = 0.0;
    double total = 0.0;
    int samples = 0;
};

struct LossReport {
    std::int64_t step = 0; // 1-based index of the step that produced it
    double adv = 0.0;
    double l1 = 0.0;
    double perc = 0.0;
    double cyc = 0.0;
    /// adv + alpha*l1 + beta*perc + gamma*cyc, in double.
    double total = 0.0;
    /// The generator objective that was back-propagated.
    double objective = 0.0;
    double disc = 0.0;
    std::array<SourceBreakdown, kNumSources> sources;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct PlannedSample {
    std::size_t index = 0;
    SupervisionSource source = SupervisionSource::original;
    int ref = 0; // reference index for the augmented source
    std::uint64_t bundle_seed = 0;
};

/// Deterministic batch schedule derived from the step counter alone: a
/// seeded permutation per epoch, supervision sources in round-robin over the
/// global sample counter, and the augmented reference cycling through 0..4.
class BatchPlanner {
public:
    BatchPlanner(std::size_t dataset_size, std::uint64_t seed);
    std::vector<PlannedSample> plan(std::int64_t step, int batch);

private:
    const std::vector<std::size_t>& permutation(std::int64_t epoch);

    std::size_t size_;
    std::uint64_t seed_;
    std::int64_t cached_epoch_ = -1;
    std::vector<std::size_t> perm_;
};

struct TrainOptions {
    /// Line-delimited JSON, one record every `log_every` steps and at the end.
    std::filesystem::path log_path;
    /// Written at the end and every `checkpoint_every` steps when > 0.
    std::filesystem::path checkpoint_path;
    std::int64_t checkpoint_every = 0;
    /// Where a diagnostic JSON is written before a non-finite loss aborts.
    std::filesystem::path dump_dir = ".";
    std::function<void(const nlohmann::json&)> on_record;
};

/// Main adversarial training of g, f and D. The dataset must outlive the trainer.
class Trainer {
public:
    Trainer(TrainConfig config, const Dataset& dataset);
    /// Resumes from a checkpoint, including the optimiser states.
    Trainer(Checkpoint checkpoint, const Dataset& dataset);

    /// One generator step and one discriminator step.
    LossReport step();
    std::vector<LossReport> run(std::int64_t steps, const TrainOptions& options = {});

    /// Steps implied by the config: max_steps, or epochs * ceil(N / batch).
    [[nodiscard]] std::int64_t planned_steps() const;
    [[nodiscard]] std::int64_t current_step() const noexcept { return step_; }
    [[nodiscard]] Checkpoint checkpoint() const;
    [[nodiscard]] Models& models() noexcept { return models_; }
    [[nodiscard]] const TrainConfig& config() const noexcept { return config_; }
    void set_dump_dir(std::filesystem::path dir) { dump_dir_ = std::move(dir); }

private:
    void init_optimizers();

    TrainConfig config_;
    const Dataset& dataset_;
    Models models_;
    std::shared_ptr<FeatureExtractor> extractor_;
    std::unique_ptr<torch::optim::Adam> opt_main_;
    std::unique_ptr<torch::optim::Adam> opt_disc_;
    BatchPlanner planner_;
    std::int64_t step_ = 0;
    std::filesystem::path dump_dir_ = ".";
};

Checkpoint train(const TrainConfig& config, const Dataset& dataset, const TrainOptions& options = {});

struct AuxReport {
    std::int64_t step = 0;
    double loss = 0.0;
    double w_l1 = 0.0;     // g_auto only
    double image_l1 = 0.0; // g_auto only, ab / 128 units
};

/// Fits the five flows by exact likelihood of the teacher vectors
/// w_c = slice(g(x), c) over present components. `steps` = 0 derives the
/// count from epochs and batch_aux. Throws ModelStateError without g.
Checkpoint train_flow(Checkpoint main, const Dataset& dataset, std::int64_t steps = 0,
                      const TrainOptions& options = {}, std::vector<AuxReport>* history = nullptr);

/// Fits g_auto with l1(w, w_teacher) + auto_image * l1(f(l, w), ab) while g
/// and f stay frozen.
Checkpoint train_auto(Checkpoint main, const Dataset& dataset, std::int64_t steps = 0,
                      const TrainOptions& options = {}, std::vector<AuxReport>* history = nullptr);

/// Mean flow NLL over every (sample, present component) pair.
double mean_flow_nll(FlowSet& flows, ColorEncoder& g, const Dataset& dataset);

/// Mean |g_auto(x) - g(x)| over present teacher components.
double mean_auto_w_l1(AutoHead& head, ColorEncoder& g, const Dataset& dataset);

} // namespace fcnet
