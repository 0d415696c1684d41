// fcnet command-line front end.

#include "fcnet/checkpoint.hpp"
#include "fcnet/config.hpp"
#include "fcnet/dataset.hpp"
#include "fcnet/error.hpp"
#include "fcnet/evaluate.hpp"
#include "fcnet/image_io.hpp"
#include "fcnet/parsing.hpp"
#include "fcnet/pipeline.hpp"
#include "fcnet/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fcnet;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ImageArgs {
    std::string gray;
    std::string parsing;
    std::string checkpoint;
    std::string out;
    std::uint64_t seed = 0;
    std::string subset = "all";
    std::string fallback = "auto";
    std::map<std::string, std::string> refs; // component or "all" -> IMAGE[,PARSING]
};

json file_entry(const fs::path& path)
{
    return {{"path", path.string()}, {"sha256", file_sha256(path)}};
}

std::optional<ParserEndpoint> env_endpoint()
{
    if (const char* url = std::getenv(kParserEndpointEnv); url != nullptr && *url != '\0') {
        return ParserEndpoint{url};
    }
    return std::nullopt;
}

RgbImage gray_as_rgb(const GrayImage& g)
{
    RgbImage rgb(g.height, g.width);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        rgb.data[3 * i] = rgb.data[3 * i + 1] = rgb.data[3 * i + 2] = g.data[i];
    }
    return rgb;
}

// Precomputed map when given, the parser endpoint otherwise.
LabelMap labels_for(const RgbImage& image, const std::string& parsing, json& inputs, const std::string& key)
{
    ParsingSource source;
    if (!parsing.empty()) {
        source.precomputed = fs::path(parsing);
        inputs[key] = file_entry(parsing);
    } else {
        source.endpoint = env_endpoint();
        if (!source.endpoint) {
            throw ParserError("no parsing map given and " + std::string(kParserEndpointEnv) + " is not set");
        }
        inputs[key] = {{"endpoint", source.endpoint->url}};
    }
    return fetch_parsing(image, source);
}

struct GrayInput {
    Planes l;
    ComponentMasks masks;
};

GrayInput load_gray(Pipeline& pipeline, const ImageArgs& args, json& inputs)
{
    if (args.gray.empty()) {
        throw InvalidArgument("--gray is required");
    }
    inputs["gray"] = file_entry(args.gray);
    const auto gray = read_gray_png(args.gray);
    const auto labels = labels_for(gray_as_rgb(gray), args.parsing, inputs, "parsing");
    return {luminance_from_gray(pipeline.fit(gray)), pipeline.masks(labels)};
}

ColorRepresentation encode_reference(Pipeline& pipeline, const std::string& spec, json& entry)
{
    const auto comma = spec.find(',');
    const std::string image_path = spec.substr(0, comma);
    const std::string parsing = comma == std::string::npos ? std::string() : spec.substr(comma + 1);
    entry["image"] = file_entry(image_path);
    const auto image = read_rgb_png(image_path);
    const auto labels = labels_for(image, parsing, entry, "parsing");
    return pipeline.encode(image, pipeline.masks(labels));
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

void write_result(const ImageArgs& args, const std::string& command, const LabImage& image,
                  const ColorRepresentation& w, json provenance)
{
    if (args.out.empty()) {
        throw InvalidArgument("--out is required");
    }
    const fs::path out(args.out);
    write_png(out, lab_to_rgb(image));
    const fs::path repr = out.string() + ".repr.json";
    write_json(repr, to_json(w));
    provenance["command"] = command;
    provenance["version"] = kVersion;
    provenance["checkpoint"] = file_entry(args.checkpoint);
    provenance["output"] = out.string();
    provenance["representation"] = repr.string();
    write_json(out.string() + ".json", provenance);
}

Pipeline open_pipeline(const std::string& path)
{
    if (path.empty()) {
        throw InvalidArgument("--checkpoint is required");
    }
    return Pipeline(load_checkpoint(path));
}

void run_generation(const std::string& command, const ImageArgs& args)
{
    auto pipeline = open_pipeline(args.checkpoint);
    json provenance;
    json inputs;
    const auto input = load_gray(pipeline, args, inputs);

    SlotAssignment slots;
    slots.seed = args.seed;
    slots.fallback = FallbackPolicy::parse(args.fallback);
    json refs = json::object();
    std::map<std::string, ColorRepresentation> encoded; // one encoding per distinct reference spec
    auto reference = [&](const std::string& spec) -> const ColorRepresentation& {
        auto it = encoded.find(spec);
        if (it == encoded.end()) {
            json entry;
            it = encoded.emplace(spec, encode_reference(pipeline, spec, entry)).first;
            refs[spec] = entry;
        }
        return it->second;
    };
    std::map<std::string, std::string> assigned_spec;
    if (const auto it = args.refs.find("all"); it != args.refs.end()) {
        for (auto c : kAllComponents) {
            slots.assigned[index_of(c)] = reference(it->second);
            assigned_spec[std::string(to_string(c))] = it->second;
        }
    }
    for (const auto& [name, spec] : args.refs) {
        if (name == "all") {
            continue;
        }
        const auto c = component_from_string(name);
        if (!c) {
            throw InvalidArgument("unknown component in --ref." + name);
        }
        slots.assigned[index_of(*c)] = reference(spec);
        assigned_spec[name] = spec;
    }

    ColorRepresentation w;
    if (command == "auto") {
        w = pipeline.automatic(input.l, input.masks);
    } else {
        if (command == "sample") {
            slots.sampled = parse_component_set(args.subset);
            provenance["subset"] = args.subset;
        }
        w = pipeline.resolve(input.l, input.masks, slots);
        provenance["fallback"] = args.fallback;
        provenance["assignment"] = assigned_spec;
    }
    provenance["seed"] = args.seed;
    provenance["inputs"] = inputs;
    provenance["references"] = refs;
    write_result(args, command, pipeline.colorize(input.l, input.masks, w), w, provenance);
}

void add_image_options(CLI::App* app, ImageArgs& args, bool references)
{
    app->add_option("--gray", args.gray, "Grayscale input PNG")->required();
    app->add_option("--parsing", args.parsing, "Label map PNG of the input (else $FCNET_PARSER_ENDPOINT)");
    app->add_option("--checkpoint", args.checkpoint, "Checkpoint file")->required();
    app->add_option("--out", args.out, "Output PNG")->required();
    app->add_option("--seed", args.seed, "Seed for sampled components");
    if (references) {
        app->add_option("--fallback", args.fallback, "Unassigned components: auto | sample | copy:<component>");
        app->add_option("--ref.all", args.refs["all"], "IMAGE[,PARSING] used for every component");
        for (auto c : kAllComponents) {
            const std::string name(to_string(c));
            app->add_option("--ref." + name, args.refs[name], "IMAGE[,PARSING] for " + name);
        }
    }
}

void prune_refs(ImageArgs& args)
{
    std::erase_if(args.refs, [](const auto& kv) { return kv.second.empty(); });
}

struct TrainArgs {
    std::string config;
    std::string out = "fcnet.ckpt";
    std::string log;
    std::string resume;
    std::int64_t steps = 0;
    std::int64_t checkpoint_every = 0;
};

struct AuxArgs {
    std::string checkpoint;
    std::string out;
    std::string log;
    std::int64_t steps = 0;
};

struct DataArgs {
    std::string config;
    std::string data;
    int synthetic = -1;
};

Dataset dataset_for(const TrainConfig& base, const DataArgs& args)
{
    TrainConfig config = args.config.empty() ? base : load_config(args.config);
    config.image_size = base.image_size;
    if (!args.data.empty()) {
        config.data_root = args.data;
        config.synthetic_count = 0;
    }
    if (args.synthetic >= 0) {
        config.synthetic_count = args.synthetic;
    }
    return load_dataset(config);
}

TrainOptions train_options(const std::string& log, const std::string& out, std::int64_t every)
{
    TrainOptions options;
    options.log_path = log;
    options.checkpoint_path = out;
    options.checkpoint_every = every;
    options.on_record = [](const json& record) { std::cout << record.dump() << '\n'; };
    return options;
}

int report_error(std::string_view kind, const std::string& message, int code)
{
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"fcnet: facial colorization with component-decoupled colour representations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train g, f and D");
    train_cmd->add_option("--config", train_args.config, "Training INI")->required();
    train_cmd->add_option("--out", train_args.out, "Checkpoint to write");
    train_cmd->add_option("--log", train_args.log, "JSONL loss log");
    train_cmd->add_option("--resume", train_args.resume, "Continue from this checkpoint");
    train_cmd->add_option("--steps", train_args.steps, "Step count (default from the config)");
    train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every, "Periodic checkpoint interval");

    AuxArgs flow_args;
    AuxArgs auto_args;
    DataArgs flow_data;
    DataArgs auto_data;
    auto add_aux = [&](const char* name, const char* help, AuxArgs& a, DataArgs& d) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--checkpoint", a.checkpoint, "Trained main checkpoint")->required();
        cmd->add_option("--out", a.out, "Checkpoint to write (default: overwrite --checkpoint)");
        cmd->add_option("--log", a.log, "JSONL loss log");
        cmd->add_option("--steps", a.steps, "Step count (default from the config)");
        cmd->add_option("--config", d.config, "INI whose [data] section replaces the checkpoint's");
        cmd->add_option("--data", d.data, "Dataset directory (images/, parsing/)");
        cmd->add_option("--synthetic", d.synthetic, "Use this many synthetic faces");
        return cmd;
    };
    auto* flow_cmd = add_aux("train-flow", "Fit the per-component flows", flow_args, flow_data);
    auto* auto_cmd = add_aux("train-auto", "Fit the automatic head", auto_args, auto_data);

    ImageArgs colorize_args;
    auto* colorize_cmd = app.add_subcommand("colorize", "Reference-guided colorization");
    add_image_options(colorize_cmd, colorize_args, true);

    ImageArgs auto_gen_args;
    auto* auto_gen_cmd = app.add_subcommand("auto", "Automatic colorization");
    add_image_options(auto_gen_cmd, auto_gen_args, false);

    ImageArgs sample_args;
    sample_args.fallback = "sample";
    auto* sample_cmd = app.add_subcommand("sample", "Sampling-guided colorization");
    add_image_options(sample_cmd, sample_args, true);
    sample_cmd->add_option("--subset", sample_args.subset, "Components drawn from the flows (comma list or all)");

    std::string eval_checkpoint;
    std::string eval_mode = "reference";
    std::string eval_embedding = "grid";
    std::string eval_out;
    std::uint64_t eval_seed = 0;
    DataArgs eval_data;
    auto* eval_cmd = app.add_subcommand("eval", "FID, CF, PSNR and SSIM over a dataset");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint")->required();
    eval_cmd->add_option("--mode", eval_mode, "reference | shifted | auto | sample | ground_truth");
    eval_cmd->add_option("--embedding", eval_embedding, "identity | grid | grid:<n> | torchscript:<path>");
    eval_cmd->add_option("--seed", eval_seed, "Seed for the sample mode");
    eval_cmd->add_option("--out", eval_out, "Also write the report here");
    eval_cmd->add_option("--config", eval_data.config, "INI whose [data] section replaces the checkpoint's");
    eval_cmd->add_option("--data", eval_data.data, "Dataset directory (images/, parsing/)");
    eval_cmd->add_option("--synthetic", eval_data.synthetic, "Use this many synthetic faces");

    std::string parse_image;
    std::string parse_out;
    std::string parse_preview;
    std::string parse_mapping;
    std::string parse_endpoint;
    auto* parse_cmd = app.add_subcommand("parse", "Face parsing through the parser endpoint");
    parse_cmd->add_option("--image", parse_image, "Input image")->required();
    parse_cmd->add_option("--out", parse_out, "Label map PNG to write")->required();
    parse_cmd->add_option("--preview", parse_preview, "Colour-coded component preview PNG");
    parse_cmd->add_option("--mapping", parse_mapping, "Label mapping INI (default CelebAMask-19)");
    parse_cmd->add_option("--parser-endpoint", parse_endpoint, "Parser URL (default $FCNET_PARSER_ENDPOINT)");

    ImageArgs encode_args;
    std::string encode_image;
    auto* encode_cmd = app.add_subcommand("encode", "Colour representation of a reference image");
    encode_cmd->add_option("--image", encode_image, "Reference image")->required();
    encode_cmd->add_option("--parsing", encode_args.parsing, "Label map PNG (else $FCNET_PARSER_ENDPOINT)");
    encode_cmd->add_option("--checkpoint", encode_args.checkpoint, "Checkpoint")->required();
    encode_cmd->add_option("--out", encode_args.out, "Representation JSON to write")->required();

    std::string synth_out;
    int synth_count = 32;
    int synth_size = 32;
    std::uint64_t synth_seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "Write a procedural face dataset");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--count", synth_count, "Number of faces");
    synth_cmd->add_option("--size", synth_size, "Image side");
    synth_cmd->add_option("--seed", synth_seed, "Generator seed");

    bool config_desk = false;
    auto* config_cmd = app.add_subcommand("config", "Print a complete training INI");
    config_cmd->add_flag("--desk", config_desk, "The small CPU configuration instead of the full-scale one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", e.what(), 2);
    }

    try {
        if (*train_cmd) {
            if (!train_args.resume.empty()) {
                auto checkpoint = load_checkpoint(train_args.resume);
                const auto dataset = load_dataset(checkpoint.config);
                Trainer trainer(std::move(checkpoint), dataset);
                const auto steps = train_args.steps > 0 ? train_args.steps
                                                        : trainer.planned_steps() - trainer.current_step();
                trainer.run(steps, train_options(train_args.log, train_args.out, train_args.checkpoint_every));
            } else {
                auto config = load_config(train_args.config);
                if (train_args.steps > 0) {
                    config.max_steps = train_args.steps;
                }
                const auto dataset = load_dataset(config);
                train(config, dataset, train_options(train_args.log, train_args.out, train_args.checkpoint_every));
            }
        } else if (*flow_cmd || *auto_cmd) {
            const bool flow = static_cast<bool>(*flow_cmd);
            const auto& a = flow ? flow_args : auto_args;
            auto checkpoint = load_checkpoint(a.checkpoint);
            const auto dataset = dataset_for(checkpoint.config, flow ? flow_data : auto_data);
            const auto out = a.out.empty() ? a.checkpoint : a.out;
            const auto options = train_options(a.log, out, 0);
            if (flow) {
                train_flow(std::move(checkpoint), dataset, a.steps, options);
            } else {
                train_auto(std::move(checkpoint), dataset, a.steps, options);
            }
        } else if (*colorize_cmd) {
            prune_refs(colorize_args);
            run_generation("colorize", colorize_args);
        } else if (*auto_gen_cmd) {
            run_generation("auto", auto_gen_args);
        } else if (*sample_cmd) {
            prune_refs(sample_args);
            run_generation("sample", sample_args);
        } else if (*eval_cmd) {
            const auto checkpoint = load_checkpoint(eval_checkpoint);
            const auto dataset = dataset_for(checkpoint.config, eval_data);
            EvalOptions options;
            options.mode = eval_mode_from_string(eval_mode);
            options.embedding = eval_embedding;
            options.seed = eval_seed;
            auto report = evaluate(checkpoint, dataset, options).to_json();
            report["checkpoint"] = file_entry(eval_checkpoint);
            report["mode"] = eval_mode;
            if (!eval_out.empty()) {
                write_json(eval_out, report);
            }
            std::cout << report.dump(2) << '\n';
        } else if (*parse_cmd) {
            ParsingSource source;
            source.endpoint = parse_endpoint.empty() ? env_endpoint() : std::optional(ParserEndpoint{parse_endpoint});
            if (!source.endpoint) {
                throw ParserError("no parser endpoint: pass --parser-endpoint or set " +
                                  std::string(kParserEndpointEnv));
            }
            const auto labels = fetch_parsing(read_rgb_png(parse_image), source);
            write_png(parse_out, labels);
            if (!parse_preview.empty()) {
                const auto mapping =
                    parse_mapping.empty() ? LabelMapping::celebamask19() : LabelMapping::from_ini(parse_mapping);
                write_png(parse_preview, render_masks(map_labels(labels, mapping)));
            }
        } else if (*encode_cmd) {
            auto pipeline = open_pipeline(encode_args.checkpoint);
            json entry;
            const auto w = encode_reference(
                pipeline, encode_args.parsing.empty() ? encode_image : encode_image + "," + encode_args.parsing,
                entry);
            write_json(encode_args.out, to_json(w));
            entry["command"] = "encode";
            entry["version"] = kVersion;
            entry["checkpoint"] = file_entry(encode_args.checkpoint);
            write_json(encode_args.out + ".json", entry);
        } else if (*config_cmd) {
            std::cout << to_ini(config_desk ? desk_config() : TrainConfig{});
        } else if (*synth_cmd) {
            write_synthetic_dataset(synth_out, synth_count, synth_size, synth_seed);
        }
    } catch (const Error& e) {
        return report_error(e.kind(), e.what(), 1);
    } catch (const std::exception& e) {
        return report_error("internal", e.what(), 1);
    }
    return 0;
}
