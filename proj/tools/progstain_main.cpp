#include <iostream>

#include "progstain/cli.hpp"

int main(int argc, char** argv) { return progstain::run_cli(argc, argv, std::cout, std::cerr); }
