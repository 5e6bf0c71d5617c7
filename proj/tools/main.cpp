#include <iostream>

#include "recharness/cli.hpp"

int main(int argc, char** argv) { return recharness::cli::main(argc, argv, std::cout, std::cerr); }
