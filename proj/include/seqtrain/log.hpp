/* Copyright (c) 2026 The seqtrain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <fstream>
#include <mutex>
#include <string>

namespace seqtrain {

enum class Verbosity { quiet, info, debug };

Verbosity parse_verbosity(const std::string& name);

// Writes lines to standard output and, when a path is given, appends them
// to a log file. Debug lines are dropped unless verbosity is debug.
class Logger {
 public:
  explicit Logger(Verbosity verbosity = Verbosity::info, const std::string& path = "");

  void info(const std::string& line);
  void debug(const std::string& line);
  Verbosity verbosity() const { return verbosity_; }

 private:
  void write(const std::string& line);

  Verbosity verbosity_;
  std::ofstream file_;
  std::mutex mu_;
};

}  // namespace seqtrain
