#include <iostream>

#include "evseg/cli.hpp"

int main(int argc, char** argv) { return evseg::run_cli(argc, argv, std::cout, std::cerr); }
