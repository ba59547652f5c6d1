#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace finn::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,     // bad flags, invalid config, missing or unreadable checkpoint
    kFeller = 3,    // Heston parameters violate the Feller condition or a bound
    kAborted = 4,   // training aborted
    kMismatch = 5,  // model, oracle and grid do not belong together
};

/// Runs one `finn` command. `args` excludes the program name. Data goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat `key=value` text as used by config files, snapshots and manifests.
/// Blank lines and lines starting with '#' are skipped.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const KeyValues& kv, std::ostream& out);

}  // namespace finn::cli
