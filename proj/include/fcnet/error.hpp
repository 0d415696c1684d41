#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcnet {

/// Root of every exception thrown by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI and the HTTP service when errors are
/// reported as JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    [[nodiscard]] std::string_view kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape_error", message) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

class UnknownLabelError : public Error {
public:
    explicit UnknownLabelError(int label)
        : Error("unknown_label", "label id " + std::to_string(label) + " is not in the label mapping"),
          label_(label) {}

    [[nodiscard]] int label() const noexcept { return label_; }

private:
    int label_;
};

/// Masks that do not assign exactly one component to every pixel.
class PartitionError : public Error {
public:
    explicit PartitionError(const std::string& message) : Error("partition_error", message) {}
};

class ParserError : public Error {
public:
    explicit ParserError(const std::string& message) : Error("parser_error", message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric_error", message) {}
};

class ModelStateError : public Error {
public:
    explicit ModelStateError(const std::string& message) : Error("model_state_error", message) {}
};

} // namespace fcnet
