/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EFCLI_CLI_HPP_
#define EFCLI_CLI_HPP_

#include <string>
#include <vector>

namespace ef::cli {

/// Runs one CLI command. `args` is the argument vector without the program
/// name (subcommand first). Output lands in the --out directory; human
/// messages go to the given streams. Returns the process exit code:
/// 0 success, 2 validation/config error, 1 runtime failure.
int run(const std::vector<std::string>& args);

}  // namespace ef::cli

#endif  // EFCLI_CLI_HPP_
