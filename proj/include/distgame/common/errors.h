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

#include <stdexcept>
#include <string>

namespace distgame {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or dimension mismatch between arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid scenario or solver configuration. `line` is 0 when unknown.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  /// Prepends context (e.g. a file name) while keeping the line.
  ConfigError(const std::string& prefix, const ConfigError& inner)
      : Error(prefix + inner.what()), line_(inner.line()) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// A robot referenced a peer outside its neighbour set.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A message was addressed to a robot that is not a graph neighbour.
class LocalityViolation : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared while rolling out states or costates.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step)
      : Error(what + " (time step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Second-derivative block assembly failed.
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Iterative linear solver residual blew up.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Sensitivity was computed at a different parameter vector.
class StalenessError : public Error {
 public:
  using Error::Error;
};

/// Reference computation could not produce an answer.
class OracleFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace distgame
