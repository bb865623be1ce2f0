#pragma once

namespace modiff::cli {

// Full command-line entry point; returns the process exit code
// (0 ok, 1 usage error, 2 runtime failure).
int run(int argc, const char* const* argv);

}  // namespace modiff::cli
