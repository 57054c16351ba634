#pragma once

#include <ostream>

namespace mtdc {

/// Entry point of the `mtdc` tool. Returns the process exit code:
/// 0 success, 2 invalid input, 3 numerical failure, 4 divergence where stability was asserted.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mtdc
