// Copyright 2026 The Prefix Authors.
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

#ifndef PREFIX_COMMON_ERROR_HPP_
#define PREFIX_COMMON_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefix {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A record could not be produced or is missing required content.
class RecordError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class HistogramError : public Error {
 public:
  using Error::Error;
};

// JSONL / config schema violation. line() is 1-based, 0 when unknown.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::size_t line = 0, std::string field = {})
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class LossError : public Error {
 public:
  using Error::Error;
};

// A loss component became NaN or infinite.
class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& component, double value)
      : Error("non-finite " + component + " loss (" + std::to_string(value) + ")"),
        component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

class SessionError : public Error {
 public:
  enum class Kind { kBadIndex, kWrongState, kComplete, kNotFound };
  SessionError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class GenerationLengthError : public Error {
 public:
  using Error::Error;
};

class PluginContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace prefix

#endif  // PREFIX_COMMON_ERROR_HPP_
