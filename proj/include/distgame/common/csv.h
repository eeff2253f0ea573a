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

#include <string>
#include <vector>

#include "distgame/common/types.h"

namespace distgame {

/// Numeric CSV with leading '#' comment lines and one header row. Empty
/// cells read back as NaN.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

/// 17 significant digits, so values survive a round trip bit-exactly.
std::string format_double(double v);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

/// Columns of the matrix are the sequence entries.
Matrix pack_sequence(const VectorSeq& seq);
VectorSeq unpack_sequence(const Matrix& m);

}  // namespace distgame
