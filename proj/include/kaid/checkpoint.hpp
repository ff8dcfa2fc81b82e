#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "kaid/tensor.hpp"

namespace kaid::nn {

// A checkpoint is two files: <base>.json, a manifest holding the caller's
// config plus {name, shape, component, offset} per parameter, and <base>.bin,
// the parameter values as little-endian float64 in manifest order. The
// component is the first dot-separated segment of the parameter name.
void save_checkpoint(const std::filesystem::path& base, const nlohmann::ordered_json& config,
                     std::span<Parameter* const> params);

nlohmann::json read_manifest(const std::filesystem::path& base);

// Fills `params` from the checkpoint. Rejects any mismatch in parameter
// names, order, shapes or precision.
void load_parameters(const std::filesystem::path& base, std::span<Parameter* const> params);

std::string component_of(const std::string& param_name);

}  // namespace kaid::nn
