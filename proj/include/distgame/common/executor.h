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

#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace distgame {

/// Runs one task per robot, optionally on a fixed worker pool. Tasks write
/// only to their own robot's slot, so results do not depend on scheduling.
class RobotExecutor {
 public:
  explicit RobotExecutor(int threads = 1);
  ~RobotExecutor();
  RobotExecutor(const RobotExecutor&) = delete;
  RobotExecutor& operator=(const RobotExecutor&) = delete;

  int threads() const { return static_cast<int>(workers_.size()) + 1; }

  /// Calls task(0..count-1) and blocks until all return. The exception of
  /// the lowest failing index is rethrown.
  void run(int count, const std::function<void(int)>& task);

 private:
  void worker_loop();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(int)>* task_ = nullptr;
  std::vector<std::exception_ptr> errors_;
  int count_ = 0;
  int next_ = 0;
  int finished_ = 0;
  long generation_ = 0;
  bool stop_ = false;
};

}  // namespace distgame
