#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patience::cli {

// Exit codes: 0 success, 1 domain error, 2 usage error. Data goes to `out`,
// diagnostics to `err`; `in` feeds the interactive consult command.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace patience::cli
