#include <iostream>

#include "dockirl/cli.hpp"

int main(int argc, char** argv) { return dockirl::run_cli(argc, argv, std::cout, std::cerr); }
