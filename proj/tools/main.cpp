// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "vidscout/cli.hpp"

int main(int argc, char** argv)
{
    return vidscout::cli_dispatch(argc, argv, std::cout, std::cerr);
}
