#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spatialdnn::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the tool on `args` (without the program name). Usage text and
/// progress go to `out`, diagnostics to `err`.
[[nodiscard]] int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
[[nodiscard]] int run(const std::vector<std::string>& args);

/// Reads a `key = value` config file into long-option arguments
/// ("--key", "value"). `#` starts a comment; `key = true` becomes a bare flag
/// and `key = false` is dropped.
[[nodiscard]] std::vector<std::string> config_arguments(const std::string& path);

}  // namespace spatialdnn::cli
