#pragma once

// The ctxscale command-line interface. Exit codes: 0 ok, 2 usage or config,
// 3 I/O, 4 numerical failure (including a sweep with invalid cells).

namespace ctxscale::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

int run(int argc, char** argv);

}  // namespace ctxscale::cli
