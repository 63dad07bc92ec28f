#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvts::cli {

/// Bad flags, unknown config keys, missing required outputs: exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 1 runtime or data error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvts::cli
