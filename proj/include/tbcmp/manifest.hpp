#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tbcmp/detail/io.hpp"
#include "tbcmp/detail/text.hpp"
#include "tbcmp/errors.hpp"
#include "tbcmp/pcap.hpp"

// Campaign manifests: a line-oriented `key = value` file with one
// [campaign] section and one [run] section per run. Paths are relative to
// the manifest's directory and must exist at load time.
//
//   [campaign]
//   id = physical-1g
//
//   [run]
//   id = run-00
//   client_trace = traces/run-00_client.trace
//   server_trace = traces/run-00_server.trace
//   pcap = pcaps/run-00.pcap
//   ab_output = ab/run-00.txt
//   delay_csv = delays/run-00.csv
//   client_process = ab
//   server_process = protonuke
//   server_endpoint = 10.0.0.2:80
//   payload = 500B
//   link = 1Gbps

namespace tbcmp {

struct ManifestError : Error {
  using Error::Error;
};

struct RunSpec {
  std::string run_id;
  std::filesystem::path client_trace, server_trace, pcap, ab_output, delay_csv;
  std::string client_process, server_process;
  std::string server_endpoint;  // ip:port, validated at load
  std::string payload_label, link_label;
};

struct CampaignManifest {
  std::string campaign_id;
  std::vector<RunSpec> runs;
  std::string digest;  // fnv1a64 of the manifest bytes, for report provenance
  std::filesystem::path source_path;
};

namespace detail_manifest {

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace detail_manifest

inline CampaignManifest parse_manifest(std::string_view text,
                                       const std::filesystem::path& base_dir) {
  CampaignManifest mf;
  mf.digest = detail_manifest::hex64(detail_manifest::fnv1a64(text));

  enum class Section { None, Campaign, Run };
  Section section = Section::None;
  RunSpec current;
  bool have_run = false;

  auto flush_run = [&] {
    if (!have_run) return;
    if (current.run_id.empty()) throw ManifestError("run section without id");
    mf.runs.push_back(current);
    current = RunSpec{};
    have_run = false;
  };

  detail::for_each_line(text, [&](std::uint64_t line_no, std::string_view raw) {
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto fail = [&](const std::string& msg) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": " + msg);
    };
    if (line.front() == '[') {
      if (line == "[campaign]") {
        flush_run();
        section = Section::Campaign;
      } else if (line == "[run]") {
        flush_run();
        section = Section::Run;
        have_run = true;
      } else {
        fail("unknown section " + std::string(line));
      }
      return;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    std::string key(detail::trim(line.substr(0, eq)));
    std::string value(detail::trim(line.substr(eq + 1)));
    if (value.empty()) fail("empty value for '" + key + "'");
    if (section == Section::Campaign) {
      if (key == "id")
        mf.campaign_id = value;
      else
        fail("unknown campaign key '" + key + "'");
    } else if (section == Section::Run) {
      if (key == "id")
        current.run_id = value;
      else if (key == "client_trace")
        current.client_trace = base_dir / value;
      else if (key == "server_trace")
        current.server_trace = base_dir / value;
      else if (key == "pcap")
        current.pcap = base_dir / value;
      else if (key == "ab_output")
        current.ab_output = base_dir / value;
      else if (key == "delay_csv")
        current.delay_csv = base_dir / value;
      else if (key == "client_process")
        current.client_process = value;
      else if (key == "server_process")
        current.server_process = value;
      else if (key == "server_endpoint")
        current.server_endpoint = value;
      else if (key == "payload")
        current.payload_label = value;
      else if (key == "link")
        current.link_label = value;
      else
        fail("unknown run key '" + key + "'");
    } else {
      fail("key outside any section");
    }
  });
  flush_run();

  if (mf.campaign_id.empty()) throw ManifestError("manifest has no [campaign] id");
  if (mf.runs.empty()) throw ManifestError("manifest '" + mf.campaign_id + "' has no runs");

  std::set<std::string> seen_ids;
  for (const auto& run : mf.runs) {
    auto ctx = [&](const std::string& msg) {
      return ManifestError("run '" + run.run_id + "': " + msg);
    };
    if (!seen_ids.insert(run.run_id).second)
      throw ManifestError("duplicate run id '" + run.run_id + "'");
    struct Field {
      const char* key;
      const std::filesystem::path& path;
    };
    for (const Field& f : {Field{"client_trace", run.client_trace},
                           Field{"server_trace", run.server_trace}, Field{"pcap", run.pcap},
                           Field{"ab_output", run.ab_output},
                           Field{"delay_csv", run.delay_csv}}) {
      if (f.path.empty()) throw ctx(std::string("missing ") + f.key);
      if (!std::filesystem::exists(f.path))
        throw ctx(std::string(f.key) + " path does not exist: " + f.path.string());
    }
    if (run.client_process.empty()) throw ctx("missing client_process");
    if (run.server_process.empty()) throw ctx("missing server_process");
    if (run.payload_label.empty()) throw ctx("missing payload");
    if (run.link_label.empty()) throw ctx("missing link");
    try {
      parse_endpoint(run.server_endpoint);
    } catch (const EndpointFormatError& e) {
      throw ctx(e.what());
    }
  }
  return mf;
}

inline CampaignManifest load_manifest(const std::filesystem::path& path) {
  auto text = detail::read_file(path);
  auto mf = parse_manifest(text, path.parent_path());
  mf.source_path = path;
  return mf;
}

// Renders a manifest with paths written relative to `base_dir`.
inline std::string format_manifest(const CampaignManifest& mf,
                                   const std::filesystem::path& base_dir) {
  auto rel = [&](const std::filesystem::path& p) {
    auto r = p.lexically_relative(base_dir);
    return (r.empty() || r.native().starts_with("..")) ? p.generic_string() : r.generic_string();
  };
  std::ostringstream os;
  os << "[campaign]\n";
  os << "id = " << mf.campaign_id << "\n";
  for (const auto& run : mf.runs) {
    os << "\n[run]\n";
    os << "id = " << run.run_id << "\n";
    os << "client_trace = " << rel(run.client_trace) << "\n";
    os << "server_trace = " << rel(run.server_trace) << "\n";
    os << "pcap = " << rel(run.pcap) << "\n";
    os << "ab_output = " << rel(run.ab_output) << "\n";
    os << "delay_csv = " << rel(run.delay_csv) << "\n";
    os << "client_process = " << run.client_process << "\n";
    os << "server_process = " << run.server_process << "\n";
    os << "server_endpoint = " << run.server_endpoint << "\n";
    os << "payload = " << run.payload_label << "\n";
    os << "link = " << run.link_label << "\n";
  }
  return os.str();
}

}  // namespace tbcmp
