#pragma once

namespace pillarcast::cli {

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 validation/usage error, 2 runtime error.
int run(int argc, const char* const* argv);

}  // namespace pillarcast::cli
