// Copyright 2026 The pointda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace pointda {

/// Base of every error raised by the library. `category()` is a short
/// machine-parseable tag the CLI prints on failure.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define POINTDA_DEFINE_ERROR(Name, tag)                                 \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(tag, what) {}        \
  };

POINTDA_DEFINE_ERROR(InvalidArgument, "invalid-argument")
POINTDA_DEFINE_ERROR(OutOfRange, "out-of-range")
POINTDA_DEFINE_ERROR(InfeasibleAssignment, "infeasible-assignment")
POINTDA_DEFINE_ERROR(EmptyGroundTruth, "empty-ground-truth")
POINTDA_DEFINE_ERROR(ContractViolation, "contract-violation")
POINTDA_DEFINE_ERROR(TrainingDivergence, "training-divergence")
POINTDA_DEFINE_ERROR(PlacementFailure, "placement-failure")
POINTDA_DEFINE_ERROR(DatasetIntegrity, "dataset-integrity")
POINTDA_DEFINE_ERROR(ParseError, "parse-error")
POINTDA_DEFINE_ERROR(IoError, "io-error")
POINTDA_DEFINE_ERROR(ConfigError, "config-error")
POINTDA_DEFINE_ERROR(MissingLabels, "missing-labels")
POINTDA_DEFINE_ERROR(InvalidInput, "invalid-input")

#undef POINTDA_DEFINE_ERROR

}  // namespace pointda
