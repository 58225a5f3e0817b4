#pragma once

namespace asc::cli {

// Dispatches a subcommand (segment, augment, split, extract, embed-ingest,
// train, eval, report, render). Exit codes: 0 success, 1 usage or
// configuration error, 2 data/format error, 3 training divergence.
// Diagnostics go to stderr; machine-readable output goes to files only.
int run_command(int argc, const char* const* argv);

}  // namespace asc::cli
