// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "prodsearch/cli.hpp"

int main(int argc, char** argv)
{
    std::ios::sync_with_stdio(false);
    return prodsearch::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
