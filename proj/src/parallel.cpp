#include "fdepi/parallel.hpp"

namespace fdepi {

namespace {
std::atomic<std::size_t> g_default_threads{1};
}

std::size_t default_threads() { return g_default_threads.load(); }

void set_default_threads(std::size_t n) { g_default_threads.store(n == 0 ? 1 : n); }

}  // namespace fdepi
