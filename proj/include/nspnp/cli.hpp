#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nspnp::cli {

/// Process exit codes.
enum ExitCode : int { ok = 0, config_error = 1, numerical_failure = 2, strict_violation = 3 };

/// SHA-1 of "blob <size>\0" + content, as printed by `git hash-object`.
std::string git_blob_sha1(std::string_view content);

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hashes every regular file below `dir` except manifest.json, keyed by
/// '/'-separated relative path. Subdirectories holding their own
/// manifest.json are skipped.
std::vector<std::pair<std::string, std::string>> hash_tree(const std::filesystem::path& dir);

}  // namespace nspnp::cli
