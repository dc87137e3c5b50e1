#include <iostream>

#include "castkit/cli.hpp"

int main(int argc, char** argv) { return castkit::run_cli(argc, argv, std::cout, std::cerr); }
