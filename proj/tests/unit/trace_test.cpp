#include <catch2/catch_amalgamated.hpp>

#include <zlib.h>

#include <string>
#include <vector>

#include "support.hpp"
#include "tbcmp/detail/rng.hpp"
#include "tbcmp/trace.hpp"

using namespace tbcmp;

TEST_CASE("parse_trace_line maps fields", "[trace]") {
  SyscallEvent ev = parse_trace_line("17 1000 0 ab (42) > read fd=3");
  CHECK(ev.event_num == 17);
  CHECK(ev.timestamp_ns == 1000);
  CHECK(ev.cpu == 0);
  CHECK(ev.process_name == "ab");
  CHECK(ev.thread_id == 42);
  CHECK(ev.direction == Direction::Enter);
  CHECK(ev.call_name == "read");
  CHECK(!ev.result_bytes.has_value());
  CHECK(ev.raw_args == "fd=3");
}

TEST_CASE("parse_trace_line reads res= on exits", "[trace]") {
  SyscallEvent ev = parse_trace_line("18 1500 0 ab (42) < read res=500");
  CHECK(ev.direction == Direction::Exit);
  REQUIRE(ev.result_bytes.has_value());
  CHECK(*ev.result_bytes == 500);

  // negative results (error returns) parse as-is
  ev = parse_trace_line("19 1600 1 ab (42) < read res=-11");
  REQUIRE(ev.result_bytes.has_value());
  CHECK(*ev.result_bytes == -11);

  // res= on an Enter line stays unparsed; result_bytes belongs to exits
  ev = parse_trace_line("20 1700 1 ab (42) > read res=500");
  CHECK(!ev.result_bytes.has_value());
}

TEST_CASE("parse_trace_line rejects malformed lines", "[trace]") {
  CHECK_THROWS_AS(parse_trace_line("xx 1500 0 ab (42) < read res=500"), MalformedLine);
  CHECK_THROWS_AS(parse_trace_line("17 1000 0 ab (42) >"), MalformedLine);       // no call
  CHECK_THROWS_AS(parse_trace_line("17 1000 0 ab 42 > read"), MalformedLine);    // bare tid
  CHECK_THROWS_AS(parse_trace_line("17 1000 0 ab (42) ^ read"), MalformedLine);  // bad dir
  CHECK_THROWS_AS(parse_trace_line("17 1000 0 ab (42) < read res=abc"), MalformedLine);
  CHECK_THROWS_AS(parse_trace_line(""), MalformedLine);
}

TEST_CASE("trace line round-trips through format and parse", "[trace]") {
  detail::Rng rng(7);
  const char* calls[] = {"read", "write", "openat", "close", "recvfrom"};
  const char* procs[] = {"ab", "protonuke", "sshd"};
  std::uint64_t ev_num = 1;
  for (int i = 0; i < 200; ++i) {
    SyscallEvent ev;
    ev.event_num = ev_num += rng.below(5) + 1;
    ev.timestamp_ns = static_cast<std::int64_t>(rng.below(1'000'000'000));
    ev.cpu = static_cast<int>(rng.below(8));
    ev.process_name = procs[rng.below(3)];
    ev.thread_id = static_cast<std::int64_t>(rng.below(100000));
    ev.direction = rng.below(2) == 0 ? Direction::Enter : Direction::Exit;
    ev.call_name = calls[rng.below(5)];
    if (ev.direction == Direction::Exit && rng.below(2) == 0) {
      std::int64_t res = static_cast<std::int64_t>(rng.below(4096)) - 64;
      ev.raw_args = "res=" + std::to_string(res);
      ev.result_bytes = res;
    } else if (rng.below(2) == 0) {
      ev.raw_args = "fd=" + std::to_string(rng.below(64));
    }
    CHECK(parse_trace_line(format_trace_line(ev)) == ev);
  }
}

namespace {

std::vector<SyscallEvent> interleaved_events() {
  std::vector<SyscallEvent> evs;
  auto add = [&](std::uint64_t num, const std::string& proc, Direction dir,
                 const std::string& call, std::optional<std::int64_t> res = std::nullopt) {
    SyscallEvent ev;
    ev.event_num = num;
    ev.timestamp_ns = static_cast<std::int64_t>(num * 10);
    ev.process_name = proc;
    ev.thread_id = 42;
    ev.direction = dir;
    ev.call_name = call;
    if (res) {
      ev.result_bytes = res;
      ev.raw_args = "res=" + std::to_string(*res);
    }
    return evs.push_back(ev);
  };
  add(1, "ab", Direction::Enter, "openat");
  add(2, "sshd", Direction::Enter, "select");
  add(3, "ab", Direction::Exit, "openat", 3);
  add(4, "ab", Direction::Enter, "read");
  add(5, "ab", Direction::Exit, "read", 500);
  add(6, "sshd", Direction::Exit, "select", 1);
  add(7, "ab", Direction::Enter, "read");
  add(8, "ab", Direction::Exit, "read", 524);
  add(9, "ab", Direction::Enter, "close");
  add(10, "ab", Direction::Exit, "close", 0);
  return evs;
}

}  // namespace

TEST_CASE("load_sequence filters by process and keeps Enter order", "[trace]") {
  auto evs = interleaved_events();
  CallSequence seq = load_sequence(evs, "ab");
  CHECK(seq.calls == std::vector<std::string>{"openat", "read", "read", "close"});

  CHECK(load_sequence(evs, "sshd").calls == std::vector<std::string>{"select"});
  CHECK(load_sequence(evs, "nonexistent").empty());
}

TEST_CASE("summarize_reads counts enters and sums positive exit bytes", "[trace]") {
  auto evs = interleaved_events();
  ReadSummary reads = summarize_reads(evs, "ab");
  CHECK(reads.read_calls == 2);
  CHECK(reads.bytes_read == 1024);

  // EAGAIN-style negative result contributes no bytes but the Enter counts
  std::vector<SyscallEvent> evs2 = evs;
  SyscallEvent enter;
  enter.event_num = 11;
  enter.process_name = "ab";
  enter.thread_id = 42;
  enter.direction = Direction::Enter;
  enter.call_name = "read";
  evs2.push_back(enter);
  SyscallEvent exit = enter;
  exit.event_num = 12;
  exit.direction = Direction::Exit;
  exit.result_bytes = -11;
  evs2.push_back(exit);
  reads = summarize_reads(evs2, "ab");
  CHECK(reads.read_calls == 3);
  CHECK(reads.bytes_read == 1024);

  CHECK(summarize_reads({}, "ab").read_calls == 0);
  CHECK(summarize_reads({}, "ab").bytes_read == 0);
}

TEST_CASE("load_sequence and summarize_reads are additive over concatenation", "[trace]") {
  auto evs = interleaved_events();
  std::vector<SyscallEvent> first(evs.begin(), evs.begin() + 5);
  std::vector<SyscallEvent> second(evs.begin() + 5, evs.end());

  auto whole = load_sequence(evs, "ab");
  auto part1 = load_sequence(first, "ab");
  auto part2 = load_sequence(second, "ab");
  std::vector<std::string> joined = part1.calls;
  joined.insert(joined.end(), part2.calls.begin(), part2.calls.end());
  CHECK(whole.calls == joined);

  auto rw = summarize_reads(evs, "ab");
  auto r1 = summarize_reads(first, "ab");
  auto r2 = summarize_reads(second, "ab");
  CHECK(rw.read_calls == r1.read_calls + r2.read_calls);
  CHECK(rw.bytes_read == r1.bytes_read + r2.bytes_read);
}

TEST_CASE("slice_sequence bounds and composition", "[trace]") {
  CallSequence seq = testsupport::make_sequence({"a", "b", "c", "d", "e", "f"});

  CHECK(slice_sequence(seq, 1, 3).calls == std::vector<std::string>{"b", "c", "d"});
  CHECK(slice_sequence(seq, 0, 100).calls == seq.calls);  // limit past the end
  CHECK(slice_sequence(seq, 4, 100).calls == std::vector<std::string>{"e", "f"});
  CHECK_THROWS_AS(slice_sequence(seq, 6, 1), SkipExceedsLength);
  CHECK_THROWS_AS(slice_sequence(seq, 7, 1), SkipExceedsLength);

  // slice(slice(s, a, b), c, d) == slice(s, a+c, min(b-c, d))
  detail::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    std::size_t a = rng.below(4), b = rng.below(6) + 1;
    std::size_t inner_len = slice_sequence(seq, a, b).size();
    std::size_t c = rng.below(inner_len);
    std::size_t d = rng.below(6) + 1;
    auto twice = slice_sequence(slice_sequence(seq, a, b), c, d);
    auto once = slice_sequence(seq, a + c, std::min(b - c, d));
    CHECK(twice.calls == once.calls);
  }
}

TEST_CASE("slice semantics at the scales the comparisons use", "[trace]") {
  CallSequence seq;
  seq.calls.assign(3'000'000, "read");
  auto sliced = slice_sequence(seq, 1'000'000, 2'000'000);
  CHECK(sliced.size() == 2'000'000);
}

TEST_CASE("TraceReader handles plain and gzip files, strict and lenient", "[trace]") {
  testsupport::TempDir tmp("trace");
  std::string text =
      "1 100 0 ab (42) > read fd=3\n"
      "2 200 0 ab (42) < read res=100\n"
      "garbage line\n"
      "3 300 0 ab (42) > close\n";

  auto plain = tmp.path() / "t.trace";
  detail::write_file(plain, text);
  {
    TraceReader reader(plain.string());
    auto scan = scan_trace(reader, "ab");
    CHECK(scan.sequence.calls == std::vector<std::string>{"read", "close"});
    CHECK(reader.malformed_lines() == 1);
  }
  {
    TraceReader strict(plain.string(), true);
    CHECK_THROWS_AS(
        [&] {
          while (strict.next()) {
          }
        }(),
        MalformedLine);
  }

  auto gz = tmp.path() / "t.trace.gz";
  gzFile f = gzopen(gz.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
  gzclose(f);
  {
    TraceReader reader(gz.string());
    auto scan = scan_trace(reader, "ab");
    CHECK(scan.sequence.calls == std::vector<std::string>{"read", "close"});
  }
}

TEST_CASE("LineReader keeps lines intact across refill boundaries", "[trace]") {
  // lines sized so that several straddle the reader's 64 KiB chunks
  testsupport::TempDir tmp("chunks");
  auto path = tmp.path() / "long.txt";
  std::string text;
  std::vector<std::string> expected;
  for (int i = 0; i < 2000; ++i) {
    std::string line = std::to_string(i) + " " + std::string(93, static_cast<char>('a' + i % 26));
    expected.push_back(line);
    text += line;
    text += '\n';
  }
  detail::write_file(path, text);
  detail::LineReader reader(path.string());
  std::string line;
  std::size_t idx = 0;
  while (reader.next(line)) {
    REQUIRE(idx < expected.size());
    CHECK(line == expected[idx]);
    ++idx;
  }
  CHECK(idx == expected.size());
}

TEST_CASE("TraceReader rejects out-of-order event numbers", "[trace]") {
  testsupport::TempDir tmp("order");
  auto path = tmp.path() / "o.trace";
  detail::write_file(path,
                     "5 100 0 ab (42) > read\n"
                     "4 200 0 ab (42) > close\n"
                     "6 300 0 ab (42) > write\n");
  TraceReader lenient(path.string());
  auto seq = load_sequence(lenient, "ab");
  CHECK(seq.calls == std::vector<std::string>{"read", "write"});
  CHECK(lenient.malformed_lines() == 1);

  TraceReader strict(path.string(), true);
  CHECK_THROWS_AS(
      [&] {
        while (strict.next()) {
        }
      }(),
      MalformedLine);
}
