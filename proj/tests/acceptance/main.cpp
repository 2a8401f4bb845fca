// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include "dpo/acceptance.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
    if (ids.empty())
        for (int i = 1; i <= dpo::kCriteria; ++i) ids.push_back(i);
    int failed = 0;
    for (int id : ids) {
        const auto r = dpo::run_criterion(id);
        std::cout << dpo::format_result(r) << std::endl;
        failed += !r.pass;
    }
    std::cout << (ids.size() - static_cast<std::size_t>(failed)) << "/" << ids.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
