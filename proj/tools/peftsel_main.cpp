// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "peftsel/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return peftsel::cli::run(std::move(args), std::cout, std::cerr);
}
