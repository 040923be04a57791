#pragma once

#include <exception>
#include <mutex>

namespace dynonet::detail {

// Exceptions must not cross an OpenMP region boundary; workers park the first
// one here and the caller rethrows after the join.
class ExceptionSlot {
 public:
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
};

}  // namespace dynonet::detail
