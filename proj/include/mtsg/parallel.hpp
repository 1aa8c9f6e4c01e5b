#ifndef MTSG_PARALLEL_HPP
#define MTSG_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mtsg::parallel {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> value{0};
  return value;
}
inline bool& inside_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Worker count used by parallel_for; 0 means hardware concurrency.
inline void set_max_threads(unsigned n) { detail::thread_setting().store(n); }

inline unsigned max_threads() {
  unsigned n = detail::thread_setting().load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs body(i) for i in [0, count). Every index writes only its own output
/// slot, so results do not depend on scheduling. Nested calls run inline.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers =
      detail::inside_region() ? 1u : static_cast<unsigned>(std::min<std::size_t>(max_threads(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    detail::inside_region() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
    detail::inside_region() = false;
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mtsg::parallel

#endif  // MTSG_PARALLEL_HPP
