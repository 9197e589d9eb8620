#pragma once

namespace sialign {

// Entry point behind the `sialign` binary; returns the process exit code.
// Errors print one `error: <kind>: <message>` line on stderr and yield 1.
int run_cli(int argc, const char* const* argv);

} // namespace sialign
