#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sarc::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kMissingFile = 3,
    kSchema = 4,
    kMixedMode = 5,
    kInvalidArgument = 6,
};

/// Entry point shared by the `sarc` binary and the tests. args[0] is the
/// program name. Diagnostics are a single line on err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sarc::cli
