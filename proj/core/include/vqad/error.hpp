// Copyright 2026 The vqad Authors. All Rights Reserved.
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

#ifndef VQAD_ERROR_HPP_
#define VQAD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace vqad {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied a value outside the operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// Two arguments disagree on a structural property (shape, dimension).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined for the given labels (e.g. a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// On-disk artifacts are inconsistent: truncated files, bad magic, count
// mismatches, or checkpoints trained against a different codebook.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace vqad

#endif  // VQAD_ERROR_HPP_
