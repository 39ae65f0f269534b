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


#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "psm/core/scalar.hpp"

namespace psm::trace {

enum class EventKind { Enter, Exit, Abort, Read, Write, New };

std::string_view event_kind_name(EventKind kind);
std::optional<EventKind> event_kind_from_name(std::string_view name);

// Reference to a heap object as it appears in a trace.
struct ObjectRef {
  std::uint64_t id = 0;
  std::string type;
  bool operator==(const ObjectRef&) const = default;
};

// A traced value: a scalar (possibly null) or an object reference.
struct TraceValue {
  Scalar scalar;
  std::optional<ObjectRef> object;

  static TraceValue of(Scalar s) { return TraceValue{std::move(s), std::nullopt}; }
  static TraceValue of(ObjectRef r) { return TraceValue{Scalar{}, std::move(r)}; }
  bool is_object() const { return object.has_value(); }
  bool operator==(const TraceValue&) const = default;
};

// One runtime observation. Which fields are meaningful depends on `kind`:
//   enter: exec_id, args, site (call-site index in the caller, -1 for roots),
//          self (receiver object id, 0 for drivers)
//   exit:  exec_id, ret
//   abort: exec_id, error
//   read/write: prop_id, obj_id, value
//   new:   type_id, obj_id
struct TraceEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Enter;
  std::uint64_t frame = 0;
  std::uint64_t parent = 0;

  std::string exec_id;
  std::vector<std::pair<std::string, TraceValue>> args;
  int site = -1;
  std::uint64_t self = 0;
  TraceValue ret;
  std::string error;

  std::string prop_id;
  std::string type_id;
  std::uint64_t obj_id = 0;
  TraceValue value;

  bool operator==(const TraceEvent&) const = default;
};

struct TraceLog {
  std::vector<TraceEvent> events;
  bool operator==(const TraceLog&) const = default;
};

// Append-only single-writer sink used by the interpreter. Assigns `seq`.
class TraceWriter {
 public:
  explicit TraceWriter(TraceLog& log) : log_(log) {}

  void append(TraceEvent event) {
    event.seq = ++last_seq_;
    log_.events.push_back(std::move(event));
  }

  std::uint64_t last_seq() const { return last_seq_; }

 private:
  TraceLog& log_;
  std::uint64_t last_seq_ = 0;
};

}  // namespace psm::trace
