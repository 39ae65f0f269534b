// Copyright 2026 The PSM Authors.
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


#include "psm/core/error.hpp"

namespace psm {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::NameResolutionError: return "NameResolutionError";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::PreconditionError: return "PreconditionError";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::RuntimeError: return "RuntimeError";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::SequenceGap: return "SequenceGap";
    case ErrorCode::OrphanFrame: return "OrphanFrame";
    case ErrorCode::UnresolvedId: return "UnresolvedId";
    case ErrorCode::EmptyUniverse: return "EmptyUniverse";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::EmptyDensity: return "EmptyDensity";
    case ErrorCode::ZeroProbabilityCondition: return "ZeroProbabilityCondition";
    case ErrorCode::VariableMismatch: return "VariableMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::UnfittedNode: return "UnfittedNode";
    case ErrorCode::QuerySyntaxError: return "QuerySyntaxError";
    case ErrorCode::StratumUnsatisfiable: return "StratumUnsatisfiable";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::BundleVersion: return "BundleVersion";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

}  // namespace psm
