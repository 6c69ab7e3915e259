#include "fusemean/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fusemean {

namespace {
std::atomic<std::size_t> g_thread_cap{ 0 };
// Set inside workers so nested parallel_for calls run inline instead of
// oversubscribing.
thread_local bool t_in_worker = false;
}

std::size_t
default_threads()
{
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::size_t cap = g_thread_cap.load();
  return cap == 0 ? hw : std::min(hw, cap);
}

void
set_default_threads(std::size_t threads)
{
  g_thread_cap.store(threads);
}

void
parallel_for(std::size_t count,
             const std::function<void(std::size_t)>& body,
             std::size_t threads)
{
  if (threads == 0)
    threads = default_threads();
  threads = std::min(threads, count);
  if (threads <= 1 || t_in_worker) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }

  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    t_in_worker = true;
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count)
        return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error)
          error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  for (auto& t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace fusemean
