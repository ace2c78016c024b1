// Copyright 2026 The lmactd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LMACTD_ERROR_H_
#define LMACTD_ERROR_H_

#include <stdexcept>
#include <string>

namespace lmactd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments or violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, corrupt or mismatched checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during optimization.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace lmactd

#define LMACTD_CHECK(cond, ExType, msg)       \
  do {                                        \
    if (!(cond)) throw ::lmactd::ExType(msg); \
  } while (0)

#endif  // LMACTD_ERROR_H_
