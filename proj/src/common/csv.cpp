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

#include "distgame/common/csv.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "distgame/common/errors.h"

namespace distgame {

int CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return static_cast<int>(k);
  return -1;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& c : table.comments) out << "# " << c << '\n';
  for (std::size_t k = 0; k < table.columns.size(); ++k) {
    out << (k ? "," : "") << table.columns[k];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (!header) {
      table.columns = split(line);
      header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split(line)) {
      if (cell.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ConfigError(path + ": bad number '" + cell + "'", lineno);
      }
      row.push_back(v);
    }
    if (row.size() != table.columns.size()) {
      throw ConfigError(path + ": expected " + std::to_string(table.columns.size()) + " cells",
                        lineno);
    }
    table.rows.push_back(std::move(row));
  }
  if (!header) throw ConfigError(path + ": missing header row");
  return table;
}

Matrix pack_sequence(const VectorSeq& seq) {
  if (seq.empty()) return Matrix();
  Matrix m(seq.front().size(), static_cast<Eigen::Index>(seq.size()));
  for (std::size_t t = 0; t < seq.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = seq[t];
  return m;
}

VectorSeq unpack_sequence(const Matrix& m) {
  VectorSeq seq;
  seq.reserve(m.cols());
  for (Eigen::Index t = 0; t < m.cols(); ++t) seq.push_back(m.col(t));
  return seq;
}

}  // namespace distgame
