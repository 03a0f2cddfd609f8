#pragma once

// Command-line front end: gen, train, scan, eval.
//
// Every subcommand accepts --config FILE with one `key = value` per line
// (`#` starts a comment). Keys are flag names without the leading dashes.
// Flags given on the command line win over the file, the file wins over the
// built-in defaults.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace srnreg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kNumerical = 3 };

/// Parses a config file into `--key value` tokens, in file order.
std::vector<std::string> config_tokens(const std::filesystem::path& path);

/// Splices config-file tokens for `args` (args[0] is the subcommand) in front
/// of the user's flags, skipping keys the user already set.
std::vector<std::string> merge_config(const std::vector<std::string>& args);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace srnreg::cli
