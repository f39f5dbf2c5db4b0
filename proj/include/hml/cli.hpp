#pragma once

#include <iosfwd>

namespace hml {

/// Entry point for the `hml` command line. Returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hml
