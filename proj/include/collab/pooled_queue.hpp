#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

namespace collab {

enum class OverflowPolicy { kDiscard, kGrow, kReplaceRandom, kWait };

/// A bounded FIFO queue paired with a pool of reusable buffers, so that
/// steady-state operation allocates nothing. `begin_push` leases a buffer
/// from the pool for the producer to fill; `end_push` enqueues it. `pop`
/// leases the front element to the consumer; the buffer returns to the pool
/// when the lease is dropped. When the pool is empty, the overflow policy
/// decides: discard the push, grow the pool, recycle a random queued element,
/// or wait for the consumer.
///
/// Safe for one producer and one consumer operating concurrently. `shutdown`
/// unblocks a waiting producer with an empty result.
template <typename T>
class PooledQueue {
public:
    explicit PooledQueue(size_t capacity, OverflowPolicy policy = OverflowPolicy::kDiscard,
                         uint64_t seed = 0)
        : policy_(policy), rng_(seed) {
        for (size_t i = 0; i < capacity; ++i) pool_.push_back(std::make_unique<T>());
    }

    class PushHandle {
    public:
        PushHandle(PushHandle&& other) noexcept : queue_(other.queue_), buf_(std::move(other.buf_)) {
            other.queue_ = nullptr;
        }
        PushHandle& operator=(PushHandle&&) = delete;
        ~PushHandle() {
            if (queue_ && buf_) queue_->release_to_pool(std::move(buf_));
        }

        T& operator*() { return *buf_; }
        T* operator->() { return buf_.get(); }

        /// Commits the buffer to the queue.
        void end_push() {
            queue_->enqueue(std::move(buf_));
            queue_ = nullptr;
        }

    private:
        friend class PooledQueue;
        PushHandle(PooledQueue* q, std::unique_ptr<T> buf) : queue_(q), buf_(std::move(buf)) {}
        PooledQueue* queue_;
        std::unique_ptr<T> buf_;
    };

    class Lease {
    public:
        Lease(Lease&& other) noexcept : queue_(other.queue_), buf_(std::move(other.buf_)) {
            other.queue_ = nullptr;
        }
        Lease& operator=(Lease&&) = delete;
        ~Lease() {
            if (queue_ && buf_) queue_->release_to_pool(std::move(buf_));
        }

        T& operator*() { return *buf_; }
        T* operator->() { return buf_.get(); }

    private:
        friend class PooledQueue;
        Lease(PooledQueue* q, std::unique_ptr<T> buf) : queue_(q), buf_(std::move(buf)) {}
        PooledQueue* queue_;
        std::unique_ptr<T> buf_;
    };

    std::optional<PushHandle> begin_push() {
        std::unique_lock lock(mutex_);
        if (pool_.empty()) {
            switch (policy_) {
                case OverflowPolicy::kDiscard:
                    ++discarded_;
                    return std::nullopt;
                case OverflowPolicy::kGrow:
                    pool_.push_back(std::make_unique<T>());
                    ++allocated_beyond_capacity_;
                    break;
                case OverflowPolicy::kReplaceRandom: {
                    if (queue_.empty()) {
                        ++discarded_;
                        return std::nullopt;
                    }
                    std::uniform_int_distribution<size_t> pick(0, queue_.size() - 1);
                    const size_t victim = pick(rng_);
                    pool_.push_back(std::move(queue_[victim]));
                    queue_.erase(queue_.begin() + victim);
                    ++discarded_;  // the recycled element was pushed but never popped
                    break;
                }
                case OverflowPolicy::kWait:
                    pool_available_.wait(lock, [&] { return !pool_.empty() || shutdown_; });
                    if (pool_.empty()) return std::nullopt;  // shut down
                    break;
            }
        }
        auto buf = std::move(pool_.back());
        pool_.pop_back();
        return PushHandle(this, std::move(buf));
    }

    std::optional<Lease> pop() {
        std::unique_lock lock(mutex_);
        if (queue_.empty()) return std::nullopt;
        auto buf = std::move(queue_.front());
        queue_.pop_front();
        ++popped_;
        return Lease(this, std::move(buf));
    }

    void shutdown() {
        std::unique_lock lock(mutex_);
        shutdown_ = true;
        pool_available_.notify_all();
    }

    size_t size() const {
        std::unique_lock lock(mutex_);
        return queue_.size();
    }
    size_t pool_size() const {
        std::unique_lock lock(mutex_);
        return pool_.size();
    }
    uint64_t pushed() const { std::unique_lock lock(mutex_); return pushed_; }
    uint64_t popped() const { std::unique_lock lock(mutex_); return popped_; }
    uint64_t discarded() const { std::unique_lock lock(mutex_); return discarded_; }
    uint64_t allocated_beyond_capacity() const {
        std::unique_lock lock(mutex_);
        return allocated_beyond_capacity_;
    }

private:
    void enqueue(std::unique_ptr<T> buf) {
        std::unique_lock lock(mutex_);
        queue_.push_back(std::move(buf));
        ++pushed_;
    }

    void release_to_pool(std::unique_ptr<T> buf) {
        std::unique_lock lock(mutex_);
        pool_.push_back(std::move(buf));
        pool_available_.notify_one();
    }

    mutable std::mutex mutex_;
    std::condition_variable pool_available_;
    OverflowPolicy policy_;
    std::mt19937_64 rng_;
    std::deque<std::unique_ptr<T>> queue_;
    std::vector<std::unique_ptr<T>> pool_;
    uint64_t pushed_ = 0, popped_ = 0, discarded_ = 0, allocated_beyond_capacity_ = 0;
    bool shutdown_ = false;
};

}  // namespace collab
