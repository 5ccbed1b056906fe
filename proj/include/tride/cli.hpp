#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tride::cli {

/// Exit codes of the `tride` binary.
enum ExitCode : int { Ok = 0, Usage = 1, ConfigError = 2, NumericError = 3, IoError = 4 };

/// Parses `args` (without the program name), runs the command and returns the
/// exit code. Diagnostics go to `err`, progress lines to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Runs a command from fully resolved options and writes the manifest into
/// the output directory. `rerun` goes through here with the stored options.
void execute(const std::string& command, const nlohmann::json& options, std::ostream& out);

/// Seed precedence: explicit flag, then TRIDE_SEED, then `fallback`.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback);

} // namespace tride::cli
