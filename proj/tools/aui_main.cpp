#include <iostream>

#include "aui/cli.hpp"

int main(int argc, char** argv) { return aui::cli::cli_dispatch(argc, argv, std::cout, std::cerr); }
