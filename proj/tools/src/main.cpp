#include <iostream>

#include "facing_cli/commands.hpp"

int main(int argc, char** argv) { return facing::cli::run(argc, argv, std::cout, std::cerr); }
