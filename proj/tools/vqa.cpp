#include <iostream>

#include "vqa/cli.hpp"

int main(int argc, char** argv) { return vqa::cli::run(argc, argv, std::cout, std::cerr); }
