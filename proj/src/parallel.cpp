#include "toepnmf/parallel.hpp"

#include <omp.h>

#include <atomic>

namespace toepnmf {

namespace {
std::atomic<int> g_threads{0};
}

void set_max_threads(int threads) { g_threads = threads > 0 ? threads : 0; }

int max_threads() {
  const int t = g_threads.load();
  return t > 0 ? t : omp_get_max_threads();
}

}  // namespace toepnmf
