#include <string>
#include <vector>

#include "qsd/bench.hpp"

int main(int argc, char** argv) {
    return qsd::bench::run_main(
        std::vector<std::string>(argv + 1, argv + argc));
}
