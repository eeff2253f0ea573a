/*
 Copyright 2026 The distgame Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "distgame/common/executor.h"

namespace distgame {

RobotExecutor::RobotExecutor(int threads) {
  for (int k = 1; k < threads; ++k) workers_.emplace_back([this] { worker_loop(); });
}

RobotExecutor::~RobotExecutor() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

void RobotExecutor::run(int count, const std::function<void(int)>& task) {
  if (workers_.empty()) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::unique_lock<std::mutex> lock(mutex_);
  task_ = &task;
  errors_.assign(count, nullptr);
  count_ = count;
  next_ = 0;
  finished_ = 0;
  ++generation_;
  wake_.notify_all();
  while (next_ < count_) {
    const int i = next_++;
    lock.unlock();
    try {
      task(i);
    } catch (...) {
      errors_[i] = std::current_exception();
    }
    lock.lock();
    ++finished_;
  }
  done_.wait(lock, [this] { return finished_ == count_; });
  task_ = nullptr;
  for (auto& e : errors_)
    if (e) std::rethrow_exception(e);
}

void RobotExecutor::worker_loop() {
  long seen = 0;
  std::unique_lock<std::mutex> lock(mutex_);
  for (;;) {
    wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
    if (stop_) return;
    seen = generation_;
    while (task_ != nullptr && next_ < count_) {
      const int i = next_++;
      const auto* task = task_;
      lock.unlock();
      try {
        (*task)(i);
      } catch (...) {
        errors_[i] = std::current_exception();
      }
      lock.lock();
      if (++finished_ == count_) done_.notify_all();
    }
  }
}

}  // namespace distgame
