#pragma once

namespace cognet::cli {

// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

int run_cli(int argc, char** argv);

}  // namespace cognet::cli
