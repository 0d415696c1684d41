#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace fcnet {

/// Facial components. The numeric value doubles as the reference index used
/// when building augmentation bundles (0 -> lips ... 4 -> background) and as
/// the channel index of every 5-channel mask tensor.
enum class Component : std::uint8_t { lips = 0, skin = 1, eyes = 2, hair = 3, background = 4 };

inline constexpr std::size_t kNumComponents = 5;

inline constexpr std::array<Component, kNumComponents> kAllComponents{
    Component::lips, Component::skin, Component::eyes, Component::hair, Component::background};

/// Tie-break priority for majority-vote downscaling (higher wins):
/// lips > eyes > hair > skin > background.
inline constexpr std::array<int, kNumComponents> kTiePriority{4, 1, 3, 2, 0};

constexpr std::size_t index_of(Component c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(Component c) noexcept
{
    switch (c) {
    case Component::lips: return "lips";
    case Component::skin: return "skin";
    case Component::eyes: return "eyes";
    case Component::hair: return "hair";
    case Component::background: return "background";
    }
    return "unknown";
}

inline std::ostream& operator<<(std::ostream& os, Component c) { return os << to_string(c); }

inline std::optional<Component> component_from_string(std::string_view name) noexcept
{
    for (auto c : kAllComponents) {
        if (to_string(c) == name) {
            return c;
        }
    }
    return std::nullopt;
}

/// Parses a comma-separated component list ("lips,hair"); "all" selects every
/// component. Throws InvalidArgument on unknown names.
std::array<bool, kNumComponents> parse_component_set(std::string_view text);

} // namespace fcnet
