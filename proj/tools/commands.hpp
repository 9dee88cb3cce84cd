#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace mgn::cli {

enum Exit : int { kOk = 0, kViolation = 1, kConfigError = 2, kRuntimeError = 3 };

struct RunConfig {
  std::string subcommand;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  std::vector<std::string> overrides;
  std::filesystem::path model_file;  // info only
};

/// Resolves the configuration, runs the subcommand and maps errors to exit codes.
int run(const RunConfig& rc, std::ostream& out, std::ostream& err);

int cmd_gradfield(const Json& cfg, const std::filesystem::path& dir, std::ostream& out);
int cmd_coupling(const Json& cfg, const std::filesystem::path& dir, std::ostream& out);
int cmd_adapt(const Json& cfg, const std::filesystem::path& dir, std::ostream& out);
int cmd_verify(const Json& cfg, const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int cmd_info(const std::filesystem::path& model_file, std::ostream& out);

int exit_code_for(ErrorKind kind);

}  // namespace mgn::cli
