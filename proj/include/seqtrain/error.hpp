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

#include <stdexcept>
#include <string>

namespace seqtrain {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid network description, experiment configuration or override.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset, checkpoint, activation file or wire message.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during training (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A worker reported ABORT or the protocol broke down.
class WorkerAbort : public Error {
 public:
  using Error::Error;
};

}  // namespace seqtrain
