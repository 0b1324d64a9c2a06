#include "gflm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gflm::main_entry(argc, argv, std::cout, std::cerr); }
