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


#include "psm/trace/log_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "psm/core/error.hpp"

namespace psm::trace {
namespace {

using OJson = nlohmann::ordered_json;

OJson value_to_json(const TraceValue& v) {
  if (v.object) return OJson{{"obj", v.object->id}, {"type", v.object->type}};
  return OJson(scalar_to_json(v.scalar));
}

TraceValue value_from_json(const OJson& j) {
  if (j.is_object()) {
    return TraceValue::of(ObjectRef{j.at("obj").get<std::uint64_t>(), j.at("type").get<std::string>()});
  }
  if (j.is_null()) return TraceValue::of(Scalar{});
  if (j.is_boolean()) return TraceValue::of(Scalar{j.get<bool>()});
  if (j.is_number_integer()) return TraceValue::of(Scalar{j.get<std::int64_t>()});
  if (j.is_number_float()) return TraceValue::of(Scalar{j.get<double>()});
  if (j.is_string()) return TraceValue::of(Scalar{j.get<std::string>()});
  throw std::invalid_argument("not a trace value: " + j.dump());
}

[[noreturn]] void fail(ErrorCode code, std::size_t line, const std::string& what) {
  throw Error(code, std::string(error_code_name(code)) + " at line " + std::to_string(line) + ": " + what);
}

TraceEvent event_from_json(const OJson& j) {
  TraceEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  auto kind = event_kind_from_name(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown event kind");
  e.kind = *kind;
  e.frame = j.at("frame").get<std::uint64_t>();
  e.parent = j.at("parent").get<std::uint64_t>();
  switch (e.kind) {
    case EventKind::Enter:
      e.exec_id = j.at("exec_id").get<std::string>();
      e.site = j.at("site").get<int>();
      e.self = j.at("self").get<std::uint64_t>();
      for (const auto& [name, v] : j.at("args").items()) e.args.emplace_back(name, value_from_json(v));
      break;
    case EventKind::Exit:
      e.exec_id = j.at("exec_id").get<std::string>();
      e.ret = value_from_json(j.at("ret"));
      break;
    case EventKind::Abort:
      e.exec_id = j.at("exec_id").get<std::string>();
      e.error = j.at("error").get<std::string>();
      break;
    case EventKind::Read:
    case EventKind::Write:
      e.prop_id = j.at("prop_id").get<std::string>();
      e.obj_id = j.at("obj_id").get<std::uint64_t>();
      e.value = value_from_json(j.at("value"));
      break;
    case EventKind::New:
      e.type_id = j.at("type_id").get<std::string>();
      e.obj_id = j.at("obj_id").get<std::uint64_t>();
      break;
  }
  return e;
}

// Shared invariant checker; `line_of(i)` maps an event index to the line
// number reported in errors.
class Validator {
 public:
  void check(const TraceEvent& e, std::size_t line) {
    if (e.seq != last_seq_ + 1) {
      fail(ErrorCode::SequenceGap, line,
           "expected seq " + std::to_string(last_seq_ + 1) + ", found " + std::to_string(e.seq));
    }
    last_seq_ = e.seq;
    std::uint64_t top = stack_.empty() ? 0 : stack_.back();
    switch (e.kind) {
      case EventKind::Enter:
        if (e.parent != top) {
          fail(ErrorCode::OrphanFrame, line,
               "frame " + std::to_string(e.frame) + " names parent " + std::to_string(e.parent) +
                   " but the innermost open frame is " + std::to_string(top));
        }
        if (e.frame == 0 || !seen_.insert(e.frame).second) {
          fail(ErrorCode::OrphanFrame, line, "frame id " + std::to_string(e.frame) + " reused");
        }
        stack_.push_back(e.frame);
        break;
      case EventKind::Exit:
      case EventKind::Abort:
        if (e.frame != top || top == 0) {
          fail(ErrorCode::OrphanFrame, line, "frame " + std::to_string(e.frame) + " closed out of order");
        }
        stack_.pop_back();
        break;
      default:
        if (e.frame != top || top == 0) {
          fail(ErrorCode::OrphanFrame, line,
               "event in frame " + std::to_string(e.frame) + " outside its enter/exit span");
        }
    }
  }

  void finish(std::size_t line) const {
    if (!stack_.empty()) fail(ErrorCode::OrphanFrame, line, "frame " + std::to_string(stack_.back()) + " never closed");
  }

 private:
  std::uint64_t last_seq_ = 0;
  std::vector<std::uint64_t> stack_;
  std::unordered_set<std::uint64_t> seen_;
};

}  // namespace

std::string_view event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::Enter: return "enter";
    case EventKind::Exit: return "exit";
    case EventKind::Abort: return "abort";
    case EventKind::Read: return "read";
    case EventKind::Write: return "write";
    case EventKind::New: return "new";
  }
  return "enter";
}

std::optional<EventKind> event_kind_from_name(std::string_view name) {
  for (auto k : {EventKind::Enter, EventKind::Exit, EventKind::Abort, EventKind::Read, EventKind::Write,
                 EventKind::New}) {
    if (event_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string event_to_line(const TraceEvent& e) {
  OJson j;
  j["seq"] = e.seq;
  j["kind"] = event_kind_name(e.kind);
  j["frame"] = e.frame;
  j["parent"] = e.parent;
  switch (e.kind) {
    case EventKind::Enter: {
      j["exec_id"] = e.exec_id;
      j["site"] = e.site;
      j["self"] = e.self;
      OJson args = OJson::object();
      for (const auto& [name, v] : e.args) args[name] = value_to_json(v);
      j["args"] = std::move(args);
      break;
    }
    case EventKind::Exit:
      j["exec_id"] = e.exec_id;
      j["ret"] = value_to_json(e.ret);
      break;
    case EventKind::Abort:
      j["exec_id"] = e.exec_id;
      j["error"] = e.error;
      break;
    case EventKind::Read:
    case EventKind::Write:
      j["prop_id"] = e.prop_id;
      j["obj_id"] = e.obj_id;
      j["value"] = value_to_json(e.value);
      break;
    case EventKind::New:
      j["type_id"] = e.type_id;
      j["obj_id"] = e.obj_id;
      break;
  }
  return j.dump();
}

void write_log(std::ostream& out, const TraceLog& log) {
  out << "{\"psm_trace\":" << kTraceFormatVersion << "}\n";
  for (const auto& e : log.events) out << event_to_line(e) << '\n';
}

std::string write_log(const TraceLog& log) {
  std::ostringstream out;
  write_log(out, log);
  return out.str();
}

void write_log_file(const std::filesystem::path& path, const TraceLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_log(out, log);
}

TraceLog read_log(std::string_view text) {
  TraceLog log;
  Validator validator;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    OJson j;
    try {
      j = OJson::parse(line);
    } catch (const std::exception& ex) {
      fail(ErrorCode::MalformedLine, line_no, ex.what());
    }
    if (first && j.is_object() && j.contains("psm_trace")) {
      first = false;
      if (!j["psm_trace"].is_number_integer() || j["psm_trace"].get<int>() != kTraceFormatVersion) {
        fail(ErrorCode::MalformedLine, line_no, "unsupported trace format version " + j["psm_trace"].dump());
      }
      continue;
    }
    first = false;
    TraceEvent e;
    try {
      e = event_from_json(j);
    } catch (const std::exception& ex) {
      fail(ErrorCode::MalformedLine, line_no, ex.what());
    }
    validator.check(e, line_no);
    log.events.push_back(std::move(e));
  }
  validator.finish(line_no);
  return log;
}

TraceLog read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_log(buf.str());
}

void validate(const TraceLog& log) {
  Validator validator;
  for (std::size_t i = 0; i < log.events.size(); ++i) validator.check(log.events[i], i + 1);
  validator.finish(log.events.size());
}

}  // namespace psm::trace
