#include <iostream>

#include "lrq/cli.hpp"

int main(int argc, char** argv) { return lrq::cli::main(argc, argv, std::cout, std::cerr); }
