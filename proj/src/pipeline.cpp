#include "fcnet/pipeline.hpp"

#include "fcnet/dataset.hpp"
#include "fcnet/error.hpp"
#include "fcnet/noref.hpp"

#include <map>

namespace fcnet {

FallbackPolicy FallbackPolicy::parse(std::string_view text)
{
    FallbackPolicy p;
    if (text == "auto") {
        p.kind = Kind::automatic;
    } else if (text == "sample") {
        p.kind = Kind::sample;
    } else if (text.starts_with("copy:")) {
        const auto c = component_from_string(text.substr(5));
        if (!c) {
            throw InvalidArgument("unknown component in fallback '" + std::string(text) + "'");
        }
        p.kind = Kind::copy;
        p.copy_from = *c;
    } else {
        throw InvalidArgument("fallback must be auto, sample or copy:<component>, got '" + std::string(text) + "'");
    }
    return p;
}

Pipeline::Pipeline(Checkpoint checkpoint) : checkpoint_(std::move(checkpoint)), mapping_(load_mapping(checkpoint_.config))
{
    if (!checkpoint_.models.g || !checkpoint_.models.f) {
        throw ModelStateError("checkpoint has no colorization networks");
    }
    checkpoint_.models.g->eval();
    checkpoint_.models.f->eval();
    if (checkpoint_.models.flow) {
        checkpoint_.models.flow->eval();
    }
    if (checkpoint_.models.auto_head) {
        checkpoint_.models.auto_head->eval();
    }
}

RgbImage Pipeline::fit(const RgbImage& image) const
{
    const int s = image_size();
    return image.height == s && image.width == s ? image : resize_area(image, s, s);
}

GrayImage Pipeline::fit(const GrayImage& image) const
{
    const int s = image_size();
    return image.height == s && image.width == s ? image : resize_area(image, s, s);
}

LabelMap Pipeline::fit(const LabelMap& labels) const
{
    const int s = image_size();
    return labels.height == s && labels.width == s ? labels : resize_nearest(labels, s, s);
}

ComponentMasks Pipeline::masks(const LabelMap& labels) const
{
    return map_labels(fit(labels), mapping_);
}

ColorRepresentation Pipeline::encode(const RgbImage& reference, const ComponentMasks& masks)
{
    const auto lab = rgb_to_lab(fit(reference));
    return fcnet::encode(lab.ab, masks, checkpoint_.models.g);
}

LabImage Pipeline::colorize(const Planes& l, const ComponentMasks& masks, const ColorRepresentation& w)
{
    return generate(l, w, masks, checkpoint_.models.f);
}

ColorRepresentation Pipeline::automatic(const Planes& l, const ComponentMasks& masks)
{
    if (!checkpoint_.models.auto_head) {
        throw ModelStateError("checkpoint has no automatic head; run train-auto first");
    }
    return auto_predict(l, masks, checkpoint_.models.auto_head);
}

ColorRepresentation Pipeline::sample(const Planes& l, const ComponentMasks& masks, std::uint64_t seed,
                                     const std::array<bool, kNumComponents>& subset,
                                     const ColorRepresentation& fallback)
{
    if (!checkpoint_.models.flow) {
        throw ModelStateError("checkpoint has no flows; run train-flow first");
    }
    return fcnet::sample(l, masks, seed, subset, fallback, checkpoint_.models.flow);
}

ColorRepresentation Pipeline::resolve(const Planes& l, const ComponentMasks& masks, const SlotAssignment& slots)
{
    const int d_w = checkpoint_.config.model.d_w;
    std::array<bool, kNumComponents> draw = slots.sampled;
    bool need_auto = false;
    for (auto c : kAllComponents) {
        const auto i = index_of(c);
        if (draw[i] || slots.assigned[i]) {
            continue;
        }
        switch (slots.fallback.kind) {
        case FallbackPolicy::Kind::automatic: need_auto = true; break;
        case FallbackPolicy::Kind::sample: draw[i] = true; break;
        case FallbackPolicy::Kind::copy:
            if (!slots.assigned[index_of(slots.fallback.copy_from)]) {
                throw InvalidArgument("fallback copies from " + std::string(to_string(slots.fallback.copy_from)) +
                                      ", which has no reference");
            }
            break;
        }
    }

    std::optional<ColorRepresentation> auto_w;
    if (need_auto) {
        auto_w = automatic(l, masks);
    }
    std::optional<ColorRepresentation> drawn;
    for (bool b : draw) {
        if (b) {
            drawn = sample(l, masks, slots.seed, draw, ColorRepresentation::zeros(d_w));
            break;
        }
    }

    std::map<Component, ColorRepresentation> parts;
    for (auto c : kAllComponents) {
        const auto i = index_of(c);
        if (draw[i]) {
            parts[c] = *drawn;
        } else if (slots.assigned[i]) {
            parts[c] = *slots.assigned[i];
        } else if (slots.fallback.kind == FallbackPolicy::Kind::automatic) {
            parts[c] = *auto_w;
        } else {
            parts[c] = *slots.assigned[index_of(slots.fallback.copy_from)];
        }
    }
    return recombine(parts);
}

} // namespace fcnet
