#pragma once

// The `swg` command line. Exit codes: 0 success, 1 usage error (bad or
// missing flag), 2 data or format error. Every error message names the flag
// or file at fault. All output files are written atomically.

#include <iosfwd>
#include <string>
#include <vector>

namespace swg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// args excludes the program name.
int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

int main(int argc, char ** argv);

} // namespace swg::cli
