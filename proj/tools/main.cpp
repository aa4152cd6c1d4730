#include <iostream>

#include "panelsynth/cli.hpp"

int main(int argc, char **argv) { return panelsynth::run_cli(argc, argv, std::cout, std::cerr); }
