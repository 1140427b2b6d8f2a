// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "nextloc/cli.hpp"

int main(int argc, char** argv) { return nextloc::cli::run(argc, argv, std::cout, std::cerr); }
