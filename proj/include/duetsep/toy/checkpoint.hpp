#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "duetsep/toy/separator.hpp"

namespace duetsep::toy {

/// Binary layout, little-endian:
///   "DSEPCKPT" | u32 version | u32 meta_len | meta JSON
///   | u32 count | count x (u32 name_len | name | u32 ndim | u64 dims[ndim] | f64 data[])
/// The metadata holds the separator geometry plus caller-supplied fields.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  SeparatorConfig config;
  ParameterSet params;
  nlohmann::json metadata = nlohmann::json::object();
};

std::string encode_checkpoint(const Separator& model, const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Separator& model,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json config_to_json(const SeparatorConfig& config);
SeparatorConfig config_from_json(const nlohmann::json& json);

}  // namespace duetsep::toy
