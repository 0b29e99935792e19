#pragma once

#include <iosfwd>

namespace patience::cli {

// Entry point shared by the real binary and the tests. Returns the process
// exit code: 0 on success, 1 on runtime failures (missing files, gateway or
// I/O errors), 2 on usage or config errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace patience::cli
