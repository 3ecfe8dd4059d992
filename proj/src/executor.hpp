#ifndef DRL_SRC_EXECUTOR_HPP_
#define DRL_SRC_EXECUTOR_HPP_

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace drl {

// Fixed set of threads running index-partitioned tasks. Thread t (the
// calling thread is t = 0) handles indices t, t + T, t + 2T, ...
class Executor {
 public:
  explicit Executor(int threads);
  ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  int threads() const { return static_cast<int>(workers_.size()) + 1; }
  void run(int n, const std::function<void(int)>& fn);

 private:
  void work(int id);
  void run_share(int id);

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int n_ = 0;
  unsigned long generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace drl

#endif  // DRL_SRC_EXECUTOR_HPP_
