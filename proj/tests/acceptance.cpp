// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: acceptance [id...] [--workers N]

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "formcount/acceptance.hpp"

int main(int argc, char** argv)
{
    std::vector<int> ids;
    unsigned workers = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--workers" && i + 1 < argc)
            workers = static_cast<unsigned>(std::stoul(argv[++i]));
        else
            ids.push_back(std::stoi(a));
    }
    const auto results = formcount::acceptance::run(ids, workers, std::cout);
    int failed = 0;
    for (const auto& r : results)
        failed += r.pass ? 0 : 1;
    std::cout << results.size() - failed << "/" << results.size() << " criteria pass" << std::endl;
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
