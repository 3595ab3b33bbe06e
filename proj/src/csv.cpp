// Copyright (c) the cchc project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cchc/csv.hpp"

#include <fstream>
#include <sstream>

#include "cchc/errors.hpp"

namespace cchc {

std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open csv file: " + path);

  std::vector<CsvRow> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    CsvRow row;
    row.line = line_number;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.fields.push_back(field);
    if (!line.empty() && line.back() == ',') row.fields.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

[[noreturn]] void bad_field(const CsvRow& row, size_t field, const char* what) {
  throw ParseError("csv line " + std::to_string(row.line) + ": " + what + " in field " +
                       std::to_string(field + 1),
                   row.line);
}

}  // namespace

int64_t csv_int(const CsvRow& row, size_t field) {
  if (field >= row.fields.size()) bad_field(row, field, "missing value");
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(row.fields[field], &pos);
    if (pos != row.fields[field].size()) bad_field(row, field, "bad integer");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    bad_field(row, field, "bad integer");
  }
}

double csv_double(const CsvRow& row, size_t field) {
  if (field >= row.fields.size()) bad_field(row, field, "missing value");
  try {
    size_t pos = 0;
    const double v = std::stod(row.fields[field], &pos);
    if (pos != row.fields[field].size()) bad_field(row, field, "bad number");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    bad_field(row, field, "bad number");
  }
}

}  // namespace cchc
