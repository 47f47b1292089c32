#pragma once

#include <iosfwd>

namespace sif {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

/// Entry point of the `sif` tool. Subcommands: datagen, score, validate,
/// hiou, serve, make-fixture.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sif
