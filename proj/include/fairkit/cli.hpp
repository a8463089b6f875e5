#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fairkit::cli {

// Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 solver failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace fairkit::cli
