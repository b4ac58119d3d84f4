#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sseg {

// Persistent worker pool used by the tensor ops to spread work over output
// blocks. Each index of a parallel_for is processed by exactly one worker
// with a fixed serial inner order, so results are bit-identical no matter
// how many threads run.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool(default_thread_count());
        return pool;
    }

    static int default_thread_count() {
        if (const char* env = std::getenv("SSEG_THREADS")) {
            const int n = std::atoi(env);
            if (n >= 1) return std::min(n, 64);
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return static_cast<int>(std::clamp(hw, 1u, 8u));
    }

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // Runs fn(i) for i in [0, count). Blocks until all indices are done.
    // The calling thread participates.
    void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn) {
        if (count <= 0) return;
        if (count == 1 || workers_.empty()) {
            for (std::int64_t i = 0; i < count; ++i) fn(i);
            return;
        }
        std::unique_lock lock(mtx_);
        task_ = &fn;
        task_count_ = count;
        next_index_ = 0;
        pending_ = count;
        ++generation_;
        lock.unlock();
        cv_.notify_all();

        work_until_drained(fn);

        std::unique_lock done_lock(mtx_);
        done_cv_.wait(done_lock, [&] { return pending_ == 0; });
        task_ = nullptr;
    }

    ~ThreadPool() {
        {
            std::lock_guard lock(mtx_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

private:
    explicit ThreadPool(int threads) {
        for (int i = 1; i < threads; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void work_until_drained(const std::function<void(std::int64_t)>& fn) {
        for (;;) {
            const std::int64_t i = next_index_.fetch_add(1, std::memory_order_relaxed);
            if (i >= task_count_) break;
            fn(i);
            if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                std::lock_guard lock(mtx_);
                done_cv_.notify_all();
            }
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::int64_t)>* task = nullptr;
            {
                std::unique_lock lock(mtx_);
                cv_.wait(lock, [&] { return stop_ || (task_ != nullptr && generation_ != seen); });
                if (stop_) return;
                seen = generation_;
                task = task_;
            }
            work_until_drained(*task);
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mtx_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::int64_t)>* task_ = nullptr;
    std::int64_t task_count_ = 0;
    std::atomic<std::int64_t> next_index_{0};
    std::atomic<std::int64_t> pending_{0};
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

inline void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn) {
    ThreadPool::instance().parallel_for(count, fn);
}

}  // namespace sseg
