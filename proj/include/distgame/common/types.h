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

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace distgame {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Robots are indexed 0..m-1 everywhere inside the library.
using RobotId = int;

using VectorSeq = std::vector<Vector>;
using MatrixSeq = std::vector<Matrix>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace distgame
