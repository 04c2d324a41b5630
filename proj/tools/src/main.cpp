// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "trmoe_cli/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return trmoe::cli::run_cli(args, std::cout, std::cerr);
}
