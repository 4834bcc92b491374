#pragma once

#include "toepnmf/types.hpp"

#include <exception>
#include <mutex>

namespace toepnmf {

// Worker cap used by every OpenMP region in the library (0 = runtime default).
void set_max_threads(int threads);
int max_threads();

// Runs body(i) for i in [0, n) on the OpenMP team. The first exception thrown
// by any iteration is rethrown on the calling thread after the loop.
template <typename Body>
void parallel_for(Index n, Body&& body) {
  std::exception_ptr first;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (Index i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(guard);
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace toepnmf
