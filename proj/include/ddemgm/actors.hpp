#pragma once

// Two long-lived worker threads, one for model updates and one for
// classification, fed from the driver thread.

#include <condition_variable>
#include <atomic>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>

namespace ddemgm {

enum class Actor { Training, Classification };

enum class ActorOrdering {
  Serialized,  // tasks complete in submission order across both actors
  Relaxed,     // each actor runs its own queue in order, independently
};

class ActorPair {
 public:
  explicit ActorPair(ActorOrdering ordering = ActorOrdering::Serialized) : ordering_(ordering) {
    training_ = std::jthread([this](std::stop_token st) { run(Actor::Training, st); });
    classification_ = std::jthread([this](std::stop_token st) { run(Actor::Classification, st); });
  }

  ActorPair(const ActorPair&) = delete;
  ActorPair& operator=(const ActorPair&) = delete;

  ~ActorPair() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
  }

  void submit(Actor actor, std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      queue(actor).push_back({next_seq_++, std::move(task)});
    }
    cv_.notify_all();
  }

  /// Blocks until every submitted task has finished; rethrows the first
  /// failure.
  void drain() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return finished_ == next_seq_; });
    if (failure_) {
      auto failure = std::exchange(failure_, nullptr);
      std::rethrow_exception(failure);
    }
  }

 private:
  struct Task {
    std::uint64_t seq;
    std::function<void()> fn;
  };

  std::deque<Task>& queue(Actor actor) {
    return actor == Actor::Training ? training_queue_ : classification_queue_;
  }

  void run(Actor actor, std::stop_token) {
    while (true) {
      Task task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] {
          if (stopping_ && queue(actor).empty()) return true;
          if (queue(actor).empty()) return false;
          return ordering_ == ActorOrdering::Relaxed || queue(actor).front().seq == finished_;
        });
        if (queue(actor).empty()) return;
        task = std::move(queue(actor).front());
        queue(actor).pop_front();
      }
      try {
        if (!failed_) task.fn();
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!failure_) failure_ = std::current_exception();
        failed_ = true;
      }
      {
        std::lock_guard lock(mutex_);
        ++finished_;
      }
      cv_.notify_all();
    }
  }

  ActorOrdering ordering_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Task> training_queue_;
  std::deque<Task> classification_queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t finished_ = 0;  // in Serialized mode also the next seq allowed to run
  bool stopping_ = false;
  std::atomic<bool> failed_ = false;
  std::exception_ptr failure_;
  // Declared last so both threads join before the members above are destroyed.
  std::jthread training_;
  std::jthread classification_;
};

}  // namespace ddemgm
