#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tbcmp/detail/io.hpp"
#include "tbcmp/detail/text.hpp"
#include "tbcmp/errors.hpp"

// System-call trace model. The canonical trace format is one event per
// line, whitespace delimited:
//
//   event_num timestamp_ns cpu process_name (tid) dir call_name args...
//
// where dir is '>' for call entry and '<' for call exit, and exit lines
// of data calls carry a `res=<int>` token in the args. Files may be plain
// text or gzip-compressed.

namespace tbcmp {

struct MalformedLine : ParseError {
  using ParseError::ParseError;
};

struct SkipExceedsLength : Error {
  using Error::Error;
};

enum class Direction { Enter, Exit };

struct SyscallEvent {
  std::uint64_t event_num = 0;
  std::int64_t timestamp_ns = 0;
  int cpu = 0;
  std::string process_name;
  std::int64_t thread_id = 0;
  Direction direction = Direction::Enter;
  std::string call_name;
  std::optional<std::int64_t> result_bytes;  // Exit events only, parsed from res=
  std::string raw_args;

  bool operator==(const SyscallEvent&) const = default;
};

// Ordered call names of the Enter events of one process in one run.
// Threads are merged; order is event_num order.
struct CallSequence {
  std::string source_id;
  std::string process_filter;
  std::vector<std::string> calls;

  std::size_t size() const { return calls.size(); }
  bool empty() const { return calls.empty(); }
};

struct ReadSummary {
  std::uint64_t read_calls = 0;  // Enter events of the read family, error returns included
  std::uint64_t bytes_read = 0;  // sum of non-negative res= values on matching Exit events
};

inline bool is_read_call(std::string_view name) {
  static constexpr std::array<std::string_view, 6> family = {
      "read", "readv", "recv", "recvfrom", "recvmsg", "pread"};
  for (auto f : family)
    if (name == f) return true;
  return false;
}

inline SyscallEvent parse_trace_line(std::string_view line) {
  using detail::next_token;
  std::string_view rest = line;
  SyscallEvent ev;

  std::string_view tok = next_token(rest);
  if (!detail::parse_int(tok, ev.event_num))
    throw MalformedLine("bad event number '" + std::string(tok) + "'");
  tok = next_token(rest);
  if (!detail::parse_int(tok, ev.timestamp_ns))
    throw MalformedLine("bad timestamp '" + std::string(tok) + "'");
  tok = next_token(rest);
  if (!detail::parse_int(tok, ev.cpu)) throw MalformedLine("bad cpu '" + std::string(tok) + "'");

  tok = next_token(rest);
  if (tok.empty()) throw MalformedLine("missing process name");
  ev.process_name = std::string(tok);

  tok = next_token(rest);
  if (tok.size() < 3 || tok.front() != '(' || tok.back() != ')' ||
      !detail::parse_int(tok.substr(1, tok.size() - 2), ev.thread_id))
    throw MalformedLine("bad thread id '" + std::string(tok) + "'");

  tok = next_token(rest);
  if (tok == ">")
    ev.direction = Direction::Enter;
  else if (tok == "<")
    ev.direction = Direction::Exit;
  else
    throw MalformedLine("bad direction '" + std::string(tok) + "'");

  tok = next_token(rest);
  if (tok.empty()) throw MalformedLine("missing call name");
  ev.call_name = std::string(tok);

  ev.raw_args = std::string(detail::trim(rest));

  if (ev.direction == Direction::Exit && !ev.raw_args.empty()) {
    std::string_view args = ev.raw_args;
    while (true) {
      std::string_view atok = next_token(args);
      if (atok.empty()) break;
      if (atok.starts_with("res=")) {
        std::int64_t res = 0;
        if (!detail::parse_int(atok.substr(4), res))
          throw MalformedLine("bad res value '" + std::string(atok) + "'");
        ev.result_bytes = res;
        break;
      }
    }
  }
  return ev;
}

inline std::string format_trace_line(const SyscallEvent& ev) {
  std::ostringstream os;
  os << ev.event_num << ' ' << ev.timestamp_ns << ' ' << ev.cpu << ' ' << ev.process_name << " ("
     << ev.thread_id << ") " << (ev.direction == Direction::Enter ? '>' : '<') << ' '
     << ev.call_name;
  if (!ev.raw_args.empty()) os << ' ' << ev.raw_args;
  return os.str();
}

// Streams SyscallEvents out of a (possibly gzipped) trace file. In strict
// mode any malformed or out-of-order line aborts with MalformedLine; in
// lenient mode such lines are counted and skipped.
class TraceReader {
 public:
  explicit TraceReader(const std::string& path, bool strict = false)
      : lines_(path), strict_(strict) {}

  std::optional<SyscallEvent> next() {
    std::string line;
    while (lines_.next(line)) {
      if (detail::trim(line).empty()) continue;
      try {
        SyscallEvent ev = parse_trace_line(line);
        if (last_event_num_ && ev.event_num <= *last_event_num_)
          throw MalformedLine("event number " + std::to_string(ev.event_num) +
                              " not increasing");
        last_event_num_ = ev.event_num;
        return ev;
      } catch (const MalformedLine& e) {
        if (strict_)
          throw MalformedLine(lines_.path() + ":" + std::to_string(lines_.line_number()) + ": " +
                              e.what());
        ++malformed_;
      }
    }
    return std::nullopt;
  }

  std::uint64_t malformed_lines() const { return malformed_; }
  const std::string& path() const { return lines_.path(); }

 private:
  detail::LineReader lines_;
  bool strict_;
  std::uint64_t malformed_ = 0;
  std::optional<std::uint64_t> last_event_num_;
};

struct TraceScan {
  CallSequence sequence;
  ReadSummary reads;
  std::uint64_t events_total = 0;
  std::uint64_t events_matched = 0;
};

// Single pass over a trace: collects the Enter-call sequence and the read
// summary for one process name. A filter that matches nothing yields an
// empty sequence (callers treat that as a warning, not an error).
template <typename EventSource>
inline TraceScan scan_trace_events(EventSource&& next_event, std::string process_filter,
                                   std::string source_id) {
  TraceScan scan;
  scan.sequence.source_id = std::move(source_id);
  scan.sequence.process_filter = std::move(process_filter);
  while (auto ev = next_event()) {
    ++scan.events_total;
    if (ev->process_name != scan.sequence.process_filter) continue;
    ++scan.events_matched;
    if (ev->direction == Direction::Enter) {
      scan.sequence.calls.push_back(ev->call_name);
      if (is_read_call(ev->call_name)) ++scan.reads.read_calls;
    } else if (ev->result_bytes && is_read_call(ev->call_name) && *ev->result_bytes > 0) {
      scan.reads.bytes_read += static_cast<std::uint64_t>(*ev->result_bytes);
    }
  }
  return scan;
}

inline TraceScan scan_trace(TraceReader& reader, const std::string& process_filter) {
  return scan_trace_events([&reader] { return reader.next(); }, process_filter, reader.path());
}

inline TraceScan scan_trace(const std::vector<SyscallEvent>& events,
                            const std::string& process_filter, std::string source_id = "") {
  std::size_t i = 0;
  return scan_trace_events(
      [&events, &i]() -> std::optional<SyscallEvent> {
        if (i >= events.size()) return std::nullopt;
        return events[i++];
      },
      process_filter, std::move(source_id));
}

inline CallSequence load_sequence(TraceReader& reader, const std::string& process_filter) {
  return scan_trace(reader, process_filter).sequence;
}

inline CallSequence load_sequence(const std::vector<SyscallEvent>& events,
                                  const std::string& process_filter, std::string source_id = "") {
  return scan_trace(events, process_filter, std::move(source_id)).sequence;
}

inline ReadSummary summarize_reads(TraceReader& reader, const std::string& process_filter) {
  return scan_trace(reader, process_filter).reads;
}

inline ReadSummary summarize_reads(const std::vector<SyscallEvent>& events,
                                   const std::string& process_filter) {
  return scan_trace(events, process_filter).reads;
}

// calls[skip : skip+limit], shorter if the source runs out. skip >= length
// means the run is too short to analyze.
inline CallSequence slice_sequence(const CallSequence& seq, std::size_t skip, std::size_t limit) {
  if (skip >= seq.calls.size())
    throw SkipExceedsLength("skip " + std::to_string(skip) + " >= sequence length " +
                            std::to_string(seq.calls.size()) + " (" + seq.source_id + ")");
  CallSequence out;
  out.source_id = seq.source_id;
  out.process_filter = seq.process_filter;
  std::size_t end = seq.calls.size() - skip < limit ? seq.calls.size() : skip + limit;
  out.calls.assign(seq.calls.begin() + static_cast<std::ptrdiff_t>(skip),
                   seq.calls.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace tbcmp
