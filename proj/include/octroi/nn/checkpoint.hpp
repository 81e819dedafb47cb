#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "octroi/nn/model.hpp"

namespace octroi::nn {

inline constexpr int kCheckpointVersion = 1;

/// Malformed or incompatible checkpoint; field() names the offending field.
class CheckpointError : public std::runtime_error {
public:
    CheckpointError(const std::string& field, const std::string& what)
        : std::runtime_error(what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class CheckpointVersionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointShapeError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

/// Writes <dir>/model.json (architecture, parameter shapes, version) and
/// <dir>/model.bin (little-endian float32, in layout order).
void save_checkpoint(const Model<float>& model, const std::filesystem::path& dir);

/// Validates the whole header and blob before constructing the model.
Model<float> load_checkpoint(const std::filesystem::path& dir);

}  // namespace octroi::nn
