// Command-line front end. Kept in a library so tests can drive it without a
// subprocess.

#ifndef ETLAB_CLI_HPP
#define ETLAB_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace etlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAttackFound = 2;

/// `args` includes the program name. Settings resolve as flags, then
/// ETLAB_* environment variables, then the --config file, then defaults.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace etlab::cli

#endif
