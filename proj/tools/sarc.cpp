#include <iostream>
#include <string>
#include <vector>

#include "sarc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return sarc::cli::run(args, std::cout, std::cerr);
}
