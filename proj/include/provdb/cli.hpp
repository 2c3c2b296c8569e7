#pragma once

#include <iosfwd>

namespace provdb {

// Entry point of the `provdb` command-line tool. Returns the process exit
// status: 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace provdb
