// Copyright 2026 The R2A Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace r2a {

/// Root of every error the library throws. The CLI maps subclasses to exit
/// codes: IoError -> 1, validation errors -> 2, backend errors -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Vector or sidecar file failed header/payload validation. `field()` names
/// the offending header field (e.g. "magic", "dim", "payload").
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DecodeError : public Error {
 public:
  DecodeError(std::size_t line, const std::string& what)
      : Error(what), line_(line) {}
  /// 1-based input line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  BackendError(int status, const std::string& what)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace r2a
