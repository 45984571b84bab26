#pragma once

#include <cstddef>
#include <functional>

namespace sqz {

/// Worker count used by the library's internal loops. 0 (default) means
/// std::thread::hardware_concurrency(). Results never depend on this value.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(i) once for every i in [0, n). Indices are handed out dynamically,
/// so body must only write to per-index state. The first exception thrown by any
/// worker is rethrown on the calling thread after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sqz
