#include "shotinf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return shotinf::cli::run(argc, argv, std::cout, std::cerr); }
