// Copyright 2026 The SurveyQC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>

namespace surveyqc {

// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind { config, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::config: return 2;
      case ErrorKind::data: return 3;
      case ErrorKind::numeric: return 4;
    }
    return 1;
  }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return {ErrorKind::config, msg}; }
inline Error data_error(const std::string& msg) { return {ErrorKind::data, msg}; }
inline Error numeric_error(const std::string& msg) { return {ErrorKind::numeric, msg}; }

namespace detail {

inline bool& quiet_flag() {
  static bool quiet = false;
  return quiet;
}

}  // namespace detail

// Silences warn(); tests flip this to keep output readable.
inline void set_quiet(bool quiet) { detail::quiet_flag() = quiet; }

inline void warn(const std::string& msg) {
  if (!detail::quiet_flag()) std::cerr << "warning: " << msg << '\n';
}

}  // namespace surveyqc
