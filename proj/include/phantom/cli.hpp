#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phantom {

// Exit status: 0 success, 1 operational error, 2 usage error.
int cli(int argc, const char* const* argv);
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phantom
