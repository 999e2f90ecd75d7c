// SPDX-License-Identifier: Apache-2.0
//
// The `lsr` command line: describe, count, degrade, infer, fuse, eval,
// train-toy and gradcheck.
#pragma once

#include <iosfwd>

namespace lsr::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kData = 2,
    kNumeric = 3,
};

/// Parses argv, runs one subcommand and returns its exit status. Results go to
/// `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lsr::cli
