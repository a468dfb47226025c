#include <iostream>

#include "sentimill/cli/commands.hpp"

int main(int argc, char** argv) { return sentimill::cli::run(argc, argv, std::cout, std::cerr); }
