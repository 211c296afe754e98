// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace peftsel::cli {

/// Stable process exit codes.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,          // bad config, flags, or input files
    kGuard = 3,          // solver size guard exceeded
    kCompatibility = 4,  // group names differ between models
};

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics to `err`.
///
///   simulate --config F --out T.ppitrace [--json]
///   select   --trace T --epsilon E --solver {greedy|dp|exhaustive|mitm} [--json]
///   frontier --trace T --mode {exact|greedy} [--json]
///   transfer --small C1|T1 --large C2 --epsilon E --iters T [--budget B] [--baseline] [--json]
///   render   --kind {heatmap|appi} --trace T --out PATH [--svg PATH]
///
/// ADAPEFT_SEED, when set, replaces the seed of every loaded config.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace peftsel::cli
