#pragma once

namespace mfl {

/// Batch front door: `solve`, `sweep`, `transport`, `penalty-check`
/// subcommands with --config/--out/--seed/--jobs flags. Exit codes: 0 ok,
/// 1 hard failure, 2 partial sweep failure, 3 config or schema error.
int run_cli(int argc, const char* const* argv);

}  // namespace mfl
