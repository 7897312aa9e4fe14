#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "vadeers/data/scaler.hpp"
#include "vadeers/model/vadeers.hpp"

// Checkpoint file layout (all integers little-endian):
//
//   8 bytes   magic "VADEERS\0"
//   uint32    format version
//   uint64    header length in bytes
//   header    UTF-8 JSON: config, prior variant, tensor table, scaler, meta
//   payload   float64 values of every tensor in table order, row-major
//
// Model tensors are stored in parameter-registration order; the vanilla
// prior has no "gmm.*" tensors.
namespace vadeers::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    model::ModelConfig config;
    nn::ParamStore params;
    std::optional<data::Scaler> scaler;
    /// Free-form provenance: split, seeds, dataset fingerprint, schedule.
    nlohmann::json meta = nlohmann::json::object();

    model::Vadeers model() const;
};

Checkpoint make_checkpoint(const model::Vadeers& model, std::optional<data::Scaler> scaler, nlohmann::json meta);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// DataError on malformed files or unsupported versions. When `expected` is
/// given, every dimension must match it; the error names both values.
Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig* expected = nullptr);

}  // namespace vadeers::train
