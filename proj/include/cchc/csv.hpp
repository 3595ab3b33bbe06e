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

#ifndef CCHC_CSV_HPP_
#define CCHC_CSV_HPP_

#include <string>
#include <vector>

namespace cchc {

// Comma-separated rows, no quoting or escaping (paths with commas are not
// supported).  Blank lines are skipped; line numbers are 1-based and reported
// in ParseError messages.
struct CsvRow {
  int line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> read_csv(const std::string& path);

// Parses a field as a number, naming the line on failure.
int64_t csv_int(const CsvRow& row, size_t field);
double csv_double(const CsvRow& row, size_t field);

}  // namespace cchc

#endif  // CCHC_CSV_HPP_
