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

#include "seqtrain/log.hpp"

#include <iostream>

#include "seqtrain/error.hpp"

namespace seqtrain {

Verbosity parse_verbosity(const std::string& name) {
  if (name == "quiet") return Verbosity::quiet;
  if (name == "info") return Verbosity::info;
  if (name == "debug") return Verbosity::debug;
  throw ConfigError("verbosity must be 'info' or 'debug', got '" + name + "'");
}

Logger::Logger(Verbosity verbosity, const std::string& path) : verbosity_(verbosity) {
  if (!path.empty()) {
    file_.open(path, std::ios::app);
    if (!file_) throw Error("cannot open log file '" + path + "'");
  }
}

void Logger::info(const std::string& line) {
  if (verbosity_ >= Verbosity::info) write(line);
}

void Logger::debug(const std::string& line) {
  if (verbosity_ >= Verbosity::debug) write(line);
}

void Logger::write(const std::string& line) {
  std::lock_guard lock(mu_);
  std::cout << line << '\n' << std::flush;
  if (file_.is_open()) file_ << line << '\n' << std::flush;
}

}  // namespace seqtrain
