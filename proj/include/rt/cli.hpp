#pragma once

namespace rt {

/// Entry point of the command-line tool. Returns 0 on success, 2 on invalid
/// input and 3 on I/O failure.
int run_cli(int argc, char** argv);

}  // namespace rt
