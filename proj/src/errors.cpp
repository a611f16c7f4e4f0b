// Copyright (c) 2026 The uwfusion Authors
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

#include "uwf/errors.hpp"

namespace uwf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kOutOfRange: return "OutOfRange";
    case ErrorKind::kOutOfFov: return "OutOfFov";
    case ErrorKind::kInsufficientPairs: return "InsufficientPairs";
    case ErrorKind::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::kEmptyBuffer: return "EmptyBuffer";
    case ErrorKind::kNonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorKind::kBiasTrustRegionExceeded: return "BiasTrustRegionExceeded";
    case ErrorKind::kIntervalMismatch: return "IntervalMismatch";
    case ErrorKind::kBehindCamera: return "BehindCamera";
    case ErrorKind::kInvalidSonarEstimate: return "InvalidSonarEstimate";
    case ErrorKind::kSolverDiverged: return "SolverDiverged";
    case ErrorKind::kInvalidScenario: return "InvalidScenario";
    case ErrorKind::kNoOverlap: return "NoOverlap";
    case ErrorKind::kMissingMetrics: return "MissingMetrics";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace uwf
