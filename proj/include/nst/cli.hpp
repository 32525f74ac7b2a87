#pragma once

namespace nst::cli {

// Full command-line entry point; returns the process exit code
// (0 success, 2 constraint violation, 3 malformed input).
int run(int argc, const char* const* argv);

}  // namespace nst::cli
