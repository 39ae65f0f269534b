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

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "psm/structure/static_model.hpp"
#include "psm/trace/event.hpp"

namespace psm::trace {

// One observation of a node's variables. Absent keys are missing cells
// (for example a read on a branch that did not execute).
struct ObservationRow {
  std::uint64_t frame = 0;  // frame that produced the row
  std::uint64_t obj_id = 0; // property/type rows: the observed object
  std::map<std::string, Scalar> cells;

  bool operator==(const ObservationRow&) const = default;
};

struct NodeRows {
  std::vector<ObservationRow> rows;
  std::size_t dropped_aborted = 0;

  bool operator==(const NodeRows&) const = default;
};

using RowsByNode = std::map<std::string, NodeRows>;

// Executable frame as reconstructed from a log.
struct FrameRecord {
  std::uint64_t frame = 0;
  std::uint64_t parent = 0;
  std::string exec_id;
  int depth = 0;  // root frames have depth 0
  int site = -1;
  bool aborted = false;
  std::uint64_t enter_seq = 0;
  std::uint64_t close_seq = 0;
  ObservationRow row;
  std::set<std::uint64_t> object_args;   // objects passed as parameters
  std::set<std::uint64_t> objects_read;  // objects whose properties were read in the frame
};

struct Assembly {
  RowsByNode rows;
  std::vector<FrameRecord> frames;  // in enter order, drivers included
};

// Groups events into per-node rows:
//   executable: one row per completed frame (aborted frames are dropped and counted)
//   property:   one row per write event
//   type:       one snapshot per object after its constructor frame exits and
//               after every completed frame that wrote to it
// Throws UnresolvedId for ids unknown to the model.
Assembly assemble_frames(const TraceLog& log, const structure::StaticModel& model);
RowsByNode assemble(const TraceLog& log, const structure::StaticModel& model);

}  // namespace psm::trace
