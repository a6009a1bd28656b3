#pragma once

namespace ctmed::cli {

// Full command-line driver behind the ctmed binary. Returns the process
// exit code: 0 on success, 2 on configuration or input-file errors, 3 on
// runtime estimation errors.
int run(int argc, const char* const* argv);

}  // namespace ctmed::cli
