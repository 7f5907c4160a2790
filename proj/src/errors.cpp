// Copyright 2026 The fmapood Authors
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

#include "fmapood/errors.hpp"

namespace fmapood {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::Data: return "DataError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Fit: return "FitError";
    case ErrorKind::DegenerateBox: return "DegenerateBox";
    case ErrorKind::DegenerateMap: return "DegenerateMap";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::Undefined: return "Undefined";
    case ErrorKind::AllNoise: return "AllNoise";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::Triplet: return "TripletError";
    case ErrorKind::Divergence: return "DivergenceError";
    case ErrorKind::Internal: return "InternalError";
  }
  return "UnknownError";
}

void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace fmapood
