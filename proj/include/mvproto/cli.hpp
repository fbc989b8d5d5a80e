#pragma once

namespace mvproto {

/// Entry point behind the `mvproto` binary. Exit codes: 0 success,
/// 2 usage/config/data error, 3 model-state error.
int run_cli(int argc, const char* const* argv);

}  // namespace mvproto
