#pragma once

#include <stdexcept>
#include <string>

namespace spatialdnn {

/// Base class for every error raised by the library. Carries the name of the
/// module that detected the failure so the CLI can report it.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    [[nodiscard]] const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(std::string module, int epoch)
        : Error(std::move(module), "training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}

    [[nodiscard]] int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class DomainViolation : public Error {
public:
    DomainViolation(std::string module, int layer, const std::string& detail)
        : Error(std::move(module), "layer " + std::to_string(layer) + " left its declared domain: " + detail),
          layer_(layer) {}

    [[nodiscard]] int layer() const noexcept { return layer_; }

private:
    int layer_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(std::string module, std::string column)
        : Error(std::move(module), "missing required column '" + column + "'"), column_(std::move(column)) {}

    [[nodiscard]] const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class UnsupportedReplicateCount : public Error {
public:
    using Error::Error;
};

}  // namespace spatialdnn
