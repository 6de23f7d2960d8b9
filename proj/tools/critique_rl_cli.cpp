#include <iostream>

#include "critique_rl/commands.hpp"

int main(int argc, char** argv) { return crl::run_cli(argc, argv, std::cout, std::cerr); }
