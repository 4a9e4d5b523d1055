#include <iostream>

#include "nmscale/cli.hpp"

int main(int argc, char** argv) { return nmscale::cli::run_cli(argc, argv, std::cout, std::cerr); }
