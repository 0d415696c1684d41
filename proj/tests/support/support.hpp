#pragma once

#include "fcnet/checkpoint.hpp"
#include "fcnet/colorspace.hpp"
#include "fcnet/config.hpp"
#include "fcnet/image_io.hpp"
#include "fcnet/parsing.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace fcnet::test {

/// Desk configuration trimmed further for unit tests (32x32, 8 synthetic faces).
TrainConfig tiny_config();

/// Fresh main networks plus untrained-but-usable g_auto and randomised g_flow.
Checkpoint fresh_checkpoint(const TrainConfig& config, std::uint64_t seed, bool with_noref = true);

/// Straight-line sRGB (8-bit) -> XYZ (D65) -> CIE-Lab in long double.
Lab oracle_lab(int r, int g, int b);

LabImage random_lab(int height, int width, std::uint64_t seed);
/// Blocky random partition (4x4 blocks) using every component.
ComponentMasks random_masks(int height, int width, std::uint64_t seed);
LabelMap synthetic_labels(int size, std::uint64_t seed = 1);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// In-process face parser: answers POST /parse (PNG in) with the synthetic
/// face label map at the request's resolution, optionally at another size or
/// with an HTTP error.
class ParserStub {
public:
    struct Behaviour {
        int status = 200;
        int out_size = 0; // 0: same as the input
    };
    ParserStub();
    explicit ParserStub(Behaviour behaviour);
    ~ParserStub();
    [[nodiscard]] std::string url() const;
    [[nodiscard]] int calls() const noexcept { return calls_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::atomic<int> calls_{0};
};

struct CommandResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

/// Runs the CLI with `args` (shell-quoted), optional extra environment
/// assignments prefixed to the command.
CommandResult run_cli(const std::vector<std::string>& args, const std::string& env = "");

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

} // namespace fcnet::test
