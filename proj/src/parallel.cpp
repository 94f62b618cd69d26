#include "fracinv/parallel.hpp"

#include <atomic>

namespace fracinv {

namespace {
std::atomic<int> g_threads{1};
}

void set_default_threads(int n) { g_threads = std::max(n, 1); }
int default_threads() { return g_threads; }

}  // namespace fracinv
