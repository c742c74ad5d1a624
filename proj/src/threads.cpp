#include "uhdres/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace uhdres {

int thread_count() {
    static int cached = [] {
        if (const char* env = std::getenv("UHDRES_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return std::min(v, 64);
        }
        unsigned hw = std::thread::hardware_concurrency();
        return static_cast<int>(std::clamp(hw, 1u, 8u));
    }();
    return cached;
}

}  // namespace uhdres
