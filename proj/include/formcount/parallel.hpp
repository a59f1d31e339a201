#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace formcount {

/// Worker count: FORMCOUNT_WORKERS if set and positive, else hardware concurrency.
inline unsigned default_workers()
{
    if (const char* env = std::getenv("FORMCOUNT_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline unsigned resolve_workers(unsigned requested)
{
    return requested == 0 ? default_workers() : requested;
}

/// Run task(i) for i in [0, tasks) on up to `workers` threads and return the results in
/// index order. The first exception thrown by any task is rethrown after all threads join.
template <class Result, class Task>
std::vector<Result> parallel_map(std::size_t tasks, unsigned workers, Task&& task)
{
    std::vector<Result> out(tasks);
    workers = std::max(1u, std::min<unsigned>(resolve_workers(workers),
                                              static_cast<unsigned>(std::max<std::size_t>(tasks, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks; ++i)
            out[i] = task(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks)
                return;
            try {
                out[i] = task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(tasks);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(body);
    }
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

} // namespace formcount
