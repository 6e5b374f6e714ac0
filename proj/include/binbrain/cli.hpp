#pragma once

namespace binbrain {

// Exit codes: 0 success, 1 usage/config error, 2 data error,
// 3 numeric failure (non-finite loss or gradient).
int run_cli(int argc, const char* const* argv);

}  // namespace binbrain
