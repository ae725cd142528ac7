#include <iostream>
#include <string>
#include <vector>

#include "twopatch/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return twopatch::cli::run(args, std::cout, std::cerr);
}
