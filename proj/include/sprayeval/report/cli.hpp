#pragma once

#include <iosfwd>

namespace sprayeval {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitEngine = 4;

/// Entry point of the sprayeval command line. Returns the process exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sprayeval
