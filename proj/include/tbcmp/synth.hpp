#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tbcmp/detail/io.hpp"
#include "tbcmp/detail/rng.hpp"
#include "tbcmp/manifest.hpp"
#include "tbcmp/markov.hpp"
#include "tbcmp/metrics.hpp"
#include "tbcmp/pcap.hpp"
#include "tbcmp/trace.hpp"

// Ground-truth input generators and exact oracles. Everything here is
// deterministic per seed, and every expectation is computed in closed
// form, independent of the parsing/assembly path under test. Walk
// probabilities are checked with exact rational arithmetic, which
// sidesteps the underflow the log-space production path works around.

namespace tbcmp {

struct SpecError : Error {
  using Error::Error;
};

// --- exact walk oracle -------------------------------------------------------

struct ExactWalkOracle {
  mpq_class probability = 1;  // defined only when invalid_count == 0
  std::uint64_t transitions = 0;
  std::uint64_t invalid_count = 0;
  std::vector<std::uint64_t> invalid_positions;

  bool valid() const { return invalid_count == 0; }

  double log10_prob() const {
    if (!valid()) throw InvalidWalk("exact walk hit invalid transitions");
    auto log10_mpz = [](const mpz_class& z) {
      long exp2 = 0;
      double d = mpz_get_d_2exp(&exp2, z.get_mpz_t());
      return std::log10(d) + static_cast<double>(exp2) * std::log10(2.0);
    };
    return log10_mpz(probability.get_num()) - log10_mpz(probability.get_den());
  }
};

// Replays a sequence over a chain keeping the probability as the exact
// product of count ratios. Mirrors walk()'s invalid-transition semantics
// (start anchor at position 0, then one check per consecutive gram pair).
inline ExactWalkOracle exact_walk(const MarkovChain& chain, const CallSequence& seq) {
  const auto order = static_cast<std::size_t>(chain.order());
  if (seq.calls.size() < order)
    throw SequenceTooShort("exact_walk: sequence shorter than chain order");
  ExactWalkOracle oracle;
  oracle.transitions = seq.calls.size() - order;
  if (oracle.transitions > 1000)
    throw SpecError("exact_walk supports at most 1000 transitions, got " +
                    std::to_string(oracle.transitions));

  auto gram_at = [&](std::size_t pos) {
    return std::span<const std::string>(seq.calls.data() + pos, order);
  };
  if (!chain.find_node(gram_at(0))) {
    oracle.invalid_positions.push_back(0);
    ++oracle.invalid_count;
  }
  for (std::uint64_t k = 0; k < oracle.transitions; ++k) {
    auto arc = chain.find_arc(gram_at(static_cast<std::size_t>(k)),
                              gram_at(static_cast<std::size_t>(k) + 1));
    if (arc) {
      mpq_class factor(arc->count, arc->from_total);
      factor.canonicalize();  // mpq arithmetic assumes canonical operands
      oracle.probability *= factor;
    } else {
      oracle.invalid_positions.push_back(k + 1);
      ++oracle.invalid_count;
    }
  }
  oracle.probability.canonicalize();
  return oracle;
}

// --- trace synthesis ---------------------------------------------------------

struct SynthTraceResult {
  CallSequence sequence;  // equals generate(chain, length, seed)
  ReadSummary expected_reads;
  std::uint64_t lines = 0;
  bool hit_dead_end = false;
};

// Writes a canonical trace realizing a generated call sequence for
// `process_name`: an Enter line per call, an Exit line after it (read
// family exits carry res= values, including occasional zero and EAGAIN
// returns), noise lines from an unrelated process sprinkled in, and the
// thread id alternating so per-process sequencing is what gets exercised.
inline SynthTraceResult synth_trace(std::ostream& os, const MarkovChain& chain,
                                    std::size_t length, std::uint64_t seed,
                                    const std::string& process_name) {
  GeneratedSequence gen = generate(chain, length, seed);
  SynthTraceResult result;
  result.sequence = gen.sequence;
  result.hit_dead_end = gen.hit_dead_end;

  detail::Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uint64_t event_num = 1;
  std::int64_t ts = 1'000'000'000;
  auto emit = [&](const std::string& proc, std::int64_t tid, char dir, const std::string& call,
                  const std::string& args) {
    int cpu = static_cast<int>(event_num % 4);
    os << event_num++ << ' ' << ts << ' ' << cpu << ' ' << proc << " (" << tid << ") " << dir
       << ' ' << call;
    if (!args.empty()) os << ' ' << args;
    os << '\n';
    ts += 1000;
    ++result.lines;
  };

  for (std::size_t i = 0; i < result.sequence.calls.size(); ++i) {
    const std::string& call = result.sequence.calls[i];
    std::int64_t tid = 1000 + static_cast<std::int64_t>(i % 2);
    if (i % 50 == 49) emit("sshd", 77, '>', "select", "");
    bool is_read = is_read_call(call);
    emit(process_name, tid, '>', call, is_read ? "fd=3" : "");
    if (is_read) {
      ++result.expected_reads.read_calls;
      std::int64_t res;
      if (i % 17 == 16)
        res = -11;  // EAGAIN
      else if (i % 13 == 12)
        res = 0;
      else
        res = 100 + static_cast<std::int64_t>(rng.below(1400));
      if (res > 0) result.expected_reads.bytes_read += static_cast<std::uint64_t>(res);
      emit(process_name, tid, '<', call, "res=" + std::to_string(res));
    } else {
      emit(process_name, tid, '<', call, "res=0");
    }
    if (i % 50 == 49) emit("sshd", 77, '<', "select", "res=1");
  }
  return result;
}

inline SynthTraceResult synth_trace_file(const std::filesystem::path& path,
                                         const MarkovChain& chain, std::size_t length,
                                         std::uint64_t seed, const std::string& process_name) {
  std::ostringstream os;
  auto result = synth_trace(os, chain, length, seed, process_name);
  detail::write_file(path, os.str());
  return result;
}

// --- pcap synthesis ----------------------------------------------------------

enum class SegmentDirection { ClientToServer, ServerToClient };

struct SegmentSpec {
  SegmentDirection direction = SegmentDirection::ServerToClient;
  std::uint32_t payload_len = 0;
  bool duplicate = false;  // send the segment twice: the second copy is a retransmission
};

struct FlowSpec {
  Endpoint client, server;
  bool handshake = true;
  bool teardown = true;
  std::vector<SegmentSpec> segments;
};

// Closed-form per-flow counters for a FlowSpec. Timestamps are left zero;
// they depend on the writer's schedule and carry no information the
// comparison uses.
inline TcpFlow expected_flow(const FlowSpec& spec) {
  DirectionStats c2s, s2c;
  if (spec.handshake) {
    c2s.packets += 2;  // SYN, final ACK
    s2c.packets += 1;  // SYN+ACK
  }
  for (const auto& seg : spec.segments) {
    DirectionStats& dir = seg.direction == SegmentDirection::ClientToServer ? c2s : s2c;
    dir.packets += seg.duplicate ? 2 : 1;
    dir.payload_bytes += seg.duplicate ? 2ull * seg.payload_len : seg.payload_len;
    if (seg.duplicate && seg.payload_len > 0) {
      // a repeated bare ACK occupies no sequence space, so only segments
      // with payload register as retransmissions
      dir.retransmitted_segments += 1;
      dir.retransmitted_bytes += seg.payload_len;
    }
  }
  if (spec.teardown) {
    c2s.packets += 2;  // FIN, final ACK
    s2c.packets += 1;  // FIN+ACK
  }
  TcpFlow flow;
  flow.key = FlowKey{spec.client, spec.server};
  bool client_is_a = true;
  if (FlowKey{spec.server, spec.client} < flow.key) {
    flow.key = FlowKey{spec.server, spec.client};
    client_is_a = false;
  }
  flow.a2b = client_is_a ? c2s : s2c;
  flow.b2a = client_is_a ? s2c : c2s;
  return flow;
}

inline ExperimentFlowStats expected_capture_stats(std::span<const FlowSpec> specs,
                                                  Endpoint server) {
  ExperimentFlowStats st;
  for (const auto& spec : specs) {
    TcpFlow f = expected_flow(spec);
    if (f.a2b.packets + f.b2a.packets == 0) continue;  // empty spec produces no flow
    ++st.flow_count;
    st.total_packets += f.a2b.packets + f.b2a.packets;
    st.total_payload_bytes += f.a2b.payload_bytes + f.b2a.payload_bytes;
    st.total_retransmitted_bytes += f.a2b.retransmitted_bytes + f.b2a.retransmitted_bytes;
    if (spec.server == server) {
      const DirectionStats& s2c = (f.key.a == spec.server) ? f.a2b : f.b2a;
      st.server_to_client_bytes += s2c.payload_bytes;
    }
  }
  return st;
}

namespace detail_synth {

struct RawPacket {
  std::int64_t ts_ns;
  Endpoint src, dst;
  std::uint32_t seq, ack;
  std::uint8_t flags;
  std::uint32_t payload_len;
};

inline void put16be(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v & 0xff));
}
inline void put32be(std::string& out, std::uint32_t v) {
  put16be(out, static_cast<std::uint16_t>(v >> 16));
  put16be(out, static_cast<std::uint16_t>(v & 0xffff));
}
inline void put16(std::string& out, std::uint16_t v, bool swapped) {
  if (swapped) {
    put16be(out, v);
  } else {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  }
}
inline void put32(std::string& out, std::uint32_t v, bool swapped) {
  if (swapped) {
    put32be(out, v);
  } else {
    put16(out, static_cast<std::uint16_t>(v & 0xffff), false);
    put16(out, static_cast<std::uint16_t>(v >> 16), false);
  }
}

}  // namespace detail_synth

struct PcapSynthOptions {
  std::optional<std::uint16_t> vlan_id;  // tag every frame with 802.1q when set
  bool byte_swapped = false;             // write headers in the opposite byte order
};

// Serializes the flows' packet schedules into a classic pcap byte blob.
// Flows are interleaved round-robin with strictly increasing timestamps;
// the seed perturbs inter-packet gaps and initial sequence numbers only,
// never the counters the expectations pin down.
inline std::string synth_pcap(std::span<const FlowSpec> specs, std::uint64_t seed,
                              const PcapSynthOptions& options = {}) {
  using detail_synth::RawPacket;
  detail::Rng rng(seed);

  std::vector<std::vector<RawPacket>> per_flow;
  for (std::size_t fi = 0; fi < specs.size(); ++fi) {
    const FlowSpec& spec = specs[fi];
    std::vector<RawPacket> pkts;
    std::uint32_t isn_c = static_cast<std::uint32_t>(rng.next_u64());
    std::uint32_t isn_s = static_cast<std::uint32_t>(rng.next_u64());
    std::uint32_t next_c = isn_c, next_s = isn_s;
    auto push = [&](bool c2s, std::uint32_t pseq, std::uint32_t pack, std::uint8_t flags,
                    std::uint32_t payload) {
      pkts.push_back(RawPacket{0, c2s ? spec.client : spec.server,
                               c2s ? spec.server : spec.client, pseq, pack, flags, payload});
    };
    if (spec.handshake) {
      push(true, next_c, 0, kTcpSyn, 0);
      ++next_c;
      push(false, next_s, next_c, kTcpSyn | kTcpAck, 0);
      ++next_s;
      push(true, next_c, next_s, kTcpAck, 0);
    }
    for (const auto& seg : spec.segments) {
      bool c2s = seg.direction == SegmentDirection::ClientToServer;
      std::uint32_t& mine = c2s ? next_c : next_s;
      std::uint32_t theirs = c2s ? next_s : next_c;
      std::uint8_t flags = kTcpAck | (seg.payload_len > 0 ? kTcpPsh : 0);
      push(c2s, mine, theirs, flags, seg.payload_len);
      if (seg.duplicate) push(c2s, mine, theirs, flags, seg.payload_len);
      mine += seg.payload_len;
    }
    if (spec.teardown) {
      push(true, next_c, next_s, kTcpFin | kTcpAck, 0);
      ++next_c;
      push(false, next_s, next_c, kTcpFin | kTcpAck, 0);
      ++next_s;
      push(true, next_c, next_s, kTcpAck, 0);
    }
    per_flow.push_back(std::move(pkts));
  }

  // round-robin interleave with a strictly monotone clock
  std::vector<RawPacket> schedule;
  std::int64_t ts = 1'700'000'000'000'000'000;
  std::vector<std::size_t> cursor(per_flow.size(), 0);
  for (bool progressed = true; progressed;) {
    progressed = false;
    for (std::size_t fi = 0; fi < per_flow.size(); ++fi) {
      if (cursor[fi] >= per_flow[fi].size()) continue;
      RawPacket p = per_flow[fi][cursor[fi]++];
      ts += 50'000 + static_cast<std::int64_t>(rng.below(20)) * 1'000;
      p.ts_ns = ts;
      schedule.push_back(p);
      progressed = true;
    }
  }

  using namespace detail_synth;
  const bool sw = options.byte_swapped;
  std::string out;
  put32(out, 0xa1b2c3d4u, sw);
  put16(out, 2, sw);
  put16(out, 4, sw);
  put32(out, 0, sw);      // thiszone
  put32(out, 0, sw);      // sigfigs
  put32(out, 65535, sw);  // snaplen
  put32(out, 1, sw);      // Ethernet

  for (const auto& p : schedule) {
    std::string frame;
    // Ethernet
    for (int i = 0; i < 6; ++i) frame.push_back(static_cast<char>(0x02 + i));
    for (int i = 0; i < 6; ++i) frame.push_back(static_cast<char>(0x12 + i));
    if (options.vlan_id) {
      put16be(frame, 0x8100);
      put16be(frame, *options.vlan_id & 0x0fff);
    }
    put16be(frame, 0x0800);
    // IPv4, no options
    std::uint16_t ip_total = static_cast<std::uint16_t>(20 + 20 + p.payload_len);
    frame.push_back(0x45);
    frame.push_back(0);
    put16be(frame, ip_total);
    put16be(frame, 0);  // id
    put16be(frame, 0);  // flags/frag
    frame.push_back(64);
    frame.push_back(6);  // TCP
    put16be(frame, 0);   // checksum unused
    put32be(frame, p.src.ip);
    put32be(frame, p.dst.ip);
    // TCP, no options
    put16be(frame, p.src.port);
    put16be(frame, p.dst.port);
    put32be(frame, p.seq);
    put32be(frame, p.ack);
    frame.push_back(0x50);  // data offset 5
    frame.push_back(static_cast<char>(p.flags));
    put16be(frame, 65535);  // window
    put16be(frame, 0);      // checksum unused
    put16be(frame, 0);      // urgent
    frame.append(p.payload_len, '\0');

    put32(out, static_cast<std::uint32_t>(p.ts_ns / 1'000'000'000), sw);
    put32(out, static_cast<std::uint32_t>((p.ts_ns % 1'000'000'000) / 1'000), sw);
    put32(out, static_cast<std::uint32_t>(frame.size()), sw);
    put32(out, static_cast<std::uint32_t>(frame.size()), sw);
    out += frame;
  }
  return out;
}

inline void synth_pcap_file(const std::filesystem::path& path, std::span<const FlowSpec> specs,
                            std::uint64_t seed, const PcapSynthOptions& options = {}) {
  detail::write_file(path, synth_pcap(specs, seed, options));
}

// --- delay and benchmark-output synthesis ------------------------------------

// Uniform one-way delays on [base, base+spread) at a 10 ms send cadence.
inline std::vector<DelaySample> synth_delays(std::size_t count, double base_ms, double spread_ms,
                                             std::uint64_t seed) {
  detail::Rng rng(seed);
  std::vector<DelaySample> out;
  out.reserve(count);
  std::int64_t ts = 1'700'000'000'000'000'000;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(DelaySample{ts, base_ms + spread_ms * rng.unit()});
    ts += 10'000'000;
  }
  return out;
}

inline AbResult make_ab_result(std::uint64_t completed, double duration_s,
                               std::uint64_t bytes_per_request, std::uint32_t concurrency) {
  AbResult r;
  r.completed_requests = completed;
  r.duration_s = duration_s;
  r.requests_per_sec = static_cast<double>(completed) / duration_s;
  r.total_transferred_bytes = completed * bytes_per_request;
  r.concurrency = concurrency;
  return r;
}

// --- whole-campaign synthesis -------------------------------------------------

// Multiplies every arc count by (1 +/- fraction) at x1000 resolution so
// small counts keep their ratios: arcs below their node's uniform share
// grow, the rest shrink. Shifting mass toward the lighter siblings gives
// every node a same-sign effect on walk log-probabilities (symmetric
// sign choices mostly cancel in expectation). The arc set is unchanged,
// and nodes whose arcs are already uniform stay uniform.
inline MarkovChain perturb_weights(const MarkovChain& chain, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0) throw SpecError("perturbation fraction must be in [0,1)");
  MarkovChain out(chain.order());
  for (MarkovChain::NodeId n = 0; n < chain.node_count(); ++n) {
    auto from_gram = chain.gram(n);
    MarkovChain::NodeId from = out.intern_node(from_gram);
    const auto& arcs = chain.arcs(n);
    double uniform = arcs.empty() ? 0.0 : 1.0 / static_cast<double>(arcs.size());
    for (const auto& a : arcs) {
      double sign = (a.weight < uniform - 1e-12) ? 1.0 : -1.0;
      auto scaled = static_cast<std::uint64_t>(std::llround(
          static_cast<double>(a.count) * 1000.0 * (1.0 + sign * fraction)));
      if (scaled == 0) scaled = 1;
      auto to_gram = chain.gram(a.to);
      out.add_count(from, out.intern_node(to_gram), scaled);
    }
  }
  if (auto s = chain.start_node()) {
    auto g = chain.gram(*s);
    out.set_start(out.intern_node(g));
  }
  out.finalize();
  return out;
}

// A small ergodic client chain: an HTTP-ish request loop with no dead
// ends and no arc weight below 0.05, so modest sequences observe every
// arc. Used as the default generator for synthetic campaigns.
inline MarkovChain default_client_chain() {
  return make_chain(1,
                    {
                        {"socket", "connect", 100},
                        {"connect", "sendto", 100},
                        {"sendto", "recvfrom", 100},
                        {"recvfrom", "recvfrom", 55},
                        {"recvfrom", "read", 15},
                        {"recvfrom", "close", 30},
                        {"read", "recvfrom", 60},
                        {"read", "close", 40},
                        {"close", "socket", 90},
                        {"close", "sendto", 10},
                        {"sendto", "sendto", 5},
                    },
                    "socket");
}

inline MarkovChain default_server_chain() {
  return make_chain(1,
                    {
                        {"accept", "recvfrom", 100},
                        {"recvfrom", "writev", 80},
                        {"recvfrom", "recvfrom", 20},
                        {"writev", "writev", 50},
                        {"writev", "close", 50},
                        {"close", "accept", 100},
                    },
                    "accept");
}

struct CampaignSynthSpec {
  std::string campaign_id = "synthetic";
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  MarkovChain client_chain = default_client_chain();
  MarkovChain server_chain = default_server_chain();
  double weight_perturbation = 0.0;
  std::size_t sequence_length = 6000;
  std::string client_process = "ab";
  std::string server_process = "protonuke";
  std::string payload_label = "500B";
  std::string link_label = "1Gbps";
  Endpoint client_endpoint{0x0a000001, 40000};  // 10.0.0.1
  Endpoint server_endpoint{0x0a000002, 80};     // 10.0.0.2
  std::uint64_t base_requests = 120000;
  double duration_s = 90.0;
  std::uint64_t bytes_per_request = 520;
  std::size_t flows_per_run = 3;
  std::size_t response_segments = 4;
  std::uint32_t response_payload = 500;
  std::size_t delay_samples = 200;
  double delay_base_ms = 1.0;
  double delay_spread_ms = 0.5;
};

// Writes a full synthetic campaign (traces, pcaps, benchmark outputs,
// delay CSVs, manifest) under out_dir and returns the manifest path.
inline std::filesystem::path synth_campaign(const CampaignSynthSpec& spec,
                                            const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (spec.runs == 0) throw SpecError("campaign needs at least one run");
  fs::create_directories(out_dir);

  MarkovChain client_chain = spec.client_chain;
  MarkovChain server_chain = spec.server_chain;
  if (spec.weight_perturbation > 0.0) {
    client_chain = perturb_weights(client_chain, spec.weight_perturbation);
    server_chain = perturb_weights(server_chain, spec.weight_perturbation);
  }

  CampaignManifest mf;
  mf.campaign_id = spec.campaign_id;
  for (std::size_t r = 0; r < spec.runs; ++r) {
    std::uint64_t run_seed = spec.seed + 7919 * (r + 1);
    detail::Rng rng(run_seed ^ 0xabcdef);
    char run_name[32];
    std::snprintf(run_name, sizeof(run_name), "run-%02zu", r);

    RunSpec run;
    run.run_id = run_name;
    run.client_trace = out_dir / "traces" / (std::string(run_name) + "_client.trace");
    run.server_trace = out_dir / "traces" / (std::string(run_name) + "_server.trace");
    run.pcap = out_dir / "pcaps" / (std::string(run_name) + ".pcap");
    run.ab_output = out_dir / "ab" / (std::string(run_name) + ".txt");
    run.delay_csv = out_dir / "delays" / (std::string(run_name) + ".csv");
    run.client_process = spec.client_process;
    run.server_process = spec.server_process;
    run.server_endpoint = endpoint_to_string(spec.server_endpoint);
    run.payload_label = spec.payload_label;
    run.link_label = spec.link_label;

    synth_trace_file(run.client_trace, client_chain, spec.sequence_length, run_seed,
                     spec.client_process);
    synth_trace_file(run.server_trace, server_chain, spec.sequence_length, run_seed + 1,
                     spec.server_process);

    std::vector<FlowSpec> flows;
    for (std::size_t f = 0; f < spec.flows_per_run; ++f) {
      FlowSpec flow;
      flow.client = spec.client_endpoint;
      flow.client.port = static_cast<std::uint16_t>(spec.client_endpoint.port + f);
      flow.server = spec.server_endpoint;
      flow.segments.push_back({SegmentDirection::ClientToServer, 120, false});
      for (std::size_t s = 0; s < spec.response_segments; ++s)
        flow.segments.push_back({SegmentDirection::ServerToClient, spec.response_payload, false});
      if (f == 0)
        flow.segments.push_back({SegmentDirection::ServerToClient, spec.response_payload, true});
      flow.segments.push_back({SegmentDirection::ClientToServer, 0, false});  // final ACK
      flows.push_back(std::move(flow));
    }
    synth_pcap_file(run.pcap, flows, run_seed + 2);

    // ~0.1% run-to-run variation keeps the confidence intervals honest
    std::uint64_t completed = spec.base_requests + rng.below(spec.base_requests / 1000 + 1);
    detail::write_file(run.ab_output,
                       format_ab_output(make_ab_result(completed, spec.duration_s,
                                                       spec.bytes_per_request, 10)));
    detail::write_file(run.delay_csv,
                       format_delay_csv(synth_delays(spec.delay_samples, spec.delay_base_ms,
                                                     spec.delay_spread_ms, run_seed + 3)));
    mf.runs.push_back(std::move(run));
  }

  fs::path manifest_path = out_dir / "manifest.ini";
  detail::write_file(manifest_path, format_manifest(mf, out_dir));
  return manifest_path;
}

}  // namespace tbcmp
