#pragma once

namespace jobmatch {

// Entry point of the `jobmatch` tool. Returns 0 when the requested computation converged and
// every output was written, 1 when it ran but did not succeed, 2 on usage or input errors.
int run_cli(int argc, char** argv);

}  // namespace jobmatch
