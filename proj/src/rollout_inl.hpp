#ifndef CALM_ROLLOUT_INL_HPP_
#define CALM_ROLLOUT_INL_HPP_

#include <algorithm>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

namespace calm {

template <typename Result>
std::vector<Result> parallel_map(int n, int threads,
                                 const std::function<Result(int)>& fn) {
  std::vector<std::optional<Result>> slots(static_cast<std::size_t>(n));
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) slots[i].emplace(fn(i));
  } else {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int i = w; i < n; i += workers) {
          try {
            slots[i].emplace(fn(i));
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  std::vector<Result> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace calm

#endif  // CALM_ROLLOUT_INL_HPP_
