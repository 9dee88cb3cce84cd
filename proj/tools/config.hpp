#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mgn/model.hpp"
#include "mgn/training.hpp"

namespace mgn::cli {

using Json = nlohmann::ordered_json;

/// Default document for a subcommand. Its keys are the only ones accepted and
/// its value types are enforced on merge.
Json defaults_for(std::string_view subcommand);

/// defaults ← file ← `--set a.b=v` overrides ← `--seed`.
/// Throws ConfigError on unknown keys, bad types or unreadable files.
Json resolve_config(std::string_view subcommand, const std::optional<std::filesystem::path>& file,
                    const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed);

model::ModelSpec model_spec_from(const Json& section, std::size_t n);
train::TrainConfig train_config_from(const Json& section, std::uint64_t seed);

}  // namespace mgn::cli
