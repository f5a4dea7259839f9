// Copyright 2026 The Flatmeter Authors
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

#ifndef FLATMETER_COMMON_IO_HPP_
#define FLATMETER_COMMON_IO_HPP_

#include <string>

namespace flatmeter {

// Whole-file helpers; failures raise IoError.
std::string ReadFile(const std::string& path);

// Writes via a sibling temporary and a rename, so readers never observe a
// partially written file. Parent directories are created.
void WriteFileAtomic(const std::string& path, const std::string& contents);

bool FileExists(const std::string& path);

// printf("%.17g"): enough digits to round-trip any double.
std::string FormatDouble(double v);

}  // namespace flatmeter

#endif  // FLATMETER_COMMON_IO_HPP_
