#pragma once

#include <iosfwd>

namespace vemspectra {

/// Entry point of the `vemspectra` tool: subcommands mesh, solve and study.
/// Returns 0 on success, 2 on usage errors and 1 on any other failure.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vemspectra
