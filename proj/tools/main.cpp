#include <vector>

#include "linemap/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return linemap::cli::run(args);
}
