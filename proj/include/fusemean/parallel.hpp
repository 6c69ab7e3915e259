#pragma once

#include <cstddef>
#include <functional>

namespace fusemean {

//! Worker count used when a caller passes 0: hardware concurrency, capped by
//! set_default_threads().
std::size_t default_threads();
void set_default_threads(std::size_t threads);

//! Runs body(i) for i in [0, count) on up to `threads` workers (0 = default).
//! Each index is executed exactly once; callers store results per index so
//! the outcome does not depend on scheduling. The first exception thrown by
//! any body is rethrown after all workers join. Calls made from inside a
//! worker run serially on that worker.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

} // namespace fusemean
