// Acceptance suite: runs every acceptance criterion at its pinned tolerance
// and prints one pass/fail line per criterion. Exit status is nonzero if any
// criterion fails.

#include "onsager/report.hpp"

#include <cstdio>
#include <cstdlib>

int main() {
    using namespace onsager;
    int threads = 2;
    if (const char* env = std::getenv("ONSAGER_LAB_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) threads = t;
    }
    AcceptanceOptions opt;
    opt.threads = threads;
    AcceptanceReport rep;
    try {
        rep = acceptance::run_acceptance(opt);
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance battery aborted: %s\n", e.what());
        return 1;
    }
    for (const auto& c : rep.criteria) {
        std::printf("[%s] criterion %d: %s", c.pass ? "PASS" : "FAIL", c.id,
                    c.name.c_str());
        if (!c.pass) std::printf(" -- %s", c.note.c_str());
        std::printf("\n");
        for (const auto& [k, v] : c.metrics) std::printf("        %-28s %.6g\n", k.c_str(), v);
    }
    std::printf(rep.all_pass() ? "ACCEPTANCE: all criteria passed\n"
                               : "ACCEPTANCE: FAILURES present\n");
    return rep.all_pass() ? 0 : 1;
}
