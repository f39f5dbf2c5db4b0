#include <iostream>

#include "hml/cli.hpp"

int main(int argc, char** argv) { return hml::run_cli(argc, argv, std::cout, std::cerr); }
