#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tbcmp/detail/text.hpp"
#include "tbcmp/errors.hpp"

// Classic pcap reading (v2.4, Ethernet link type, microsecond timestamps)
// and TCP flow reconstruction with per-direction packet, byte and
// retransmission counters. This covers the per-flow statistics the
// comparison needs; it is not a full TCP analyzer.

namespace tbcmp {

struct PcapFormatError : ParseError {
  using ParseError::ParseError;
};
struct BadMagic : PcapFormatError {
  using PcapFormatError::PcapFormatError;
};
struct TruncatedHeader : PcapFormatError {
  using PcapFormatError::PcapFormatError;
};
struct TruncatedPacket : PcapFormatError {
  using PcapFormatError::PcapFormatError;
};
struct UnsupportedLinkType : PcapFormatError {
  using PcapFormatError::PcapFormatError;
};
struct UnknownServerEndpoint : Error {
  using Error::Error;
};
struct EndpointFormatError : ParseError {
  using ParseError::ParseError;
};

struct Endpoint {
  std::uint32_t ip = 0;  // host byte order
  std::uint16_t port = 0;

  auto operator<=>(const Endpoint&) const = default;
};

inline std::string endpoint_to_string(Endpoint e) {
  std::ostringstream os;
  os << ((e.ip >> 24) & 0xff) << '.' << ((e.ip >> 16) & 0xff) << '.' << ((e.ip >> 8) & 0xff) << '.'
     << (e.ip & 0xff) << ':' << e.port;
  return os.str();
}

inline Endpoint parse_endpoint(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos)
    throw EndpointFormatError("endpoint '" + std::string(text) + "' is not ip:port");
  auto octets = detail::split(text.substr(0, colon), '.');
  Endpoint e;
  std::uint32_t ip = 0;
  if (octets.size() != 4)
    throw EndpointFormatError("endpoint '" + std::string(text) + "' has a bad IPv4 address");
  for (auto oct : octets) {
    std::uint32_t v = 0;
    if (!detail::parse_int(oct, v) || v > 255)
      throw EndpointFormatError("endpoint '" + std::string(text) + "' has a bad IPv4 address");
    ip = (ip << 8) | v;
  }
  e.ip = ip;
  std::uint32_t port = 0;
  if (!detail::parse_int(text.substr(colon + 1), port) || port > 65535)
    throw EndpointFormatError("endpoint '" + std::string(text) + "' has a bad port");
  e.port = static_cast<std::uint16_t>(port);
  return e;
}

// TCP header flag bits (wire positions).
enum TcpFlagBits : std::uint8_t {
  kTcpFin = 0x01,
  kTcpSyn = 0x02,
  kTcpRst = 0x04,
  kTcpPsh = 0x08,
  kTcpAck = 0x10,
};

struct PacketRecord {
  std::int64_t ts_ns = 0;
  std::uint32_t captured_len = 0;
  std::uint32_t orig_len = 0;
  Endpoint src, dst;
  std::uint32_t tcp_seq = 0;
  std::uint32_t tcp_ack = 0;
  std::uint8_t flags = 0;
  std::uint32_t payload_len = 0;  // TCP payload per the IP/TCP headers
};

struct PcapSkipCounters {
  std::uint64_t non_tcp = 0;    // non-IPv4 ethertype or non-TCP protocol
  std::uint64_t truncated = 0;  // snaplen cut into the headers, or file ended early
};

// Streams TCP PacketRecords out of a classic pcap file. Non-IPv4 and
// non-TCP packets are skipped and counted. In lenient mode truncated
// packets are skipped (or end the stream when the file itself is cut
// short); in strict mode they throw.
class PcapReader {
 public:
  explicit PcapReader(const std::string& path, bool strict = false)
      : path_(path), strict_(strict), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path);
    unsigned char hdr[24];
    if (!read_exact(hdr, sizeof(hdr)))
      throw TruncatedHeader(path + ": file shorter than the pcap global header");
    std::uint32_t magic = u32_native(hdr);
    if (magic == 0xa1b2c3d4u)
      swapped_ = false;
    else if (magic == 0xd4c3b2a1u)
      swapped_ = true;
    else
      throw BadMagic(path + ": not a classic pcap file");
    std::uint16_t major = u16(hdr + 4);
    std::uint16_t minor = u16(hdr + 6);
    if (major != 2 || minor != 4)
      throw PcapFormatError(path + ": unsupported pcap version " + std::to_string(major) + "." +
                            std::to_string(minor));
    std::uint32_t linktype = u32(hdr + 20);
    if (linktype != 1)
      throw UnsupportedLinkType(path + ": link type " + std::to_string(linktype) +
                                " is not Ethernet");
  }

  std::optional<PacketRecord> next() {
    unsigned char rec[16];
    std::vector<unsigned char> data;
    while (true) {
      std::size_t got = read_some(rec, sizeof(rec));
      if (got == 0) return std::nullopt;
      if (got < sizeof(rec)) {
        if (strict_) throw TruncatedHeader(path_ + ": truncated packet record header");
        ++skipped_.truncated;
        return std::nullopt;
      }
      std::uint32_t ts_sec = u32(rec), ts_usec = u32(rec + 4);
      std::uint32_t incl_len = u32(rec + 8), orig_len = u32(rec + 12);
      if (incl_len > (1u << 26)) {
        if (strict_) throw TruncatedPacket(path_ + ": implausible packet length");
        ++skipped_.truncated;
        return std::nullopt;
      }
      data.resize(incl_len);
      if (read_some(data.data(), incl_len) < incl_len) {
        if (strict_) throw TruncatedPacket(path_ + ": packet data cut short by end of file");
        ++skipped_.truncated;
        return std::nullopt;
      }
      PacketRecord pkt;
      pkt.ts_ns = static_cast<std::int64_t>(ts_sec) * 1'000'000'000 +
                  static_cast<std::int64_t>(ts_usec) * 1'000;
      pkt.captured_len = incl_len;
      pkt.orig_len = orig_len;
      switch (parse_ethernet(data, pkt)) {
        case ParseOutcome::Ok:
          return pkt;
        case ParseOutcome::NotTcp:
          ++skipped_.non_tcp;
          continue;
        case ParseOutcome::Truncated:
          if (strict_) throw TruncatedPacket(path_ + ": capture cut into the packet headers");
          ++skipped_.truncated;
          continue;
      }
    }
  }

  const PcapSkipCounters& skipped() const { return skipped_; }
  const std::string& path() const { return path_; }

 private:
  enum class ParseOutcome { Ok, NotTcp, Truncated };

  ParseOutcome parse_ethernet(const std::vector<unsigned char>& d, PacketRecord& pkt) {
    std::size_t off = 14;
    if (d.size() < off) return ParseOutcome::Truncated;
    std::uint16_t ethertype = be16(d.data() + 12);
    // 802.1q tags are transparent: skip each 4-byte tag header
    while (ethertype == 0x8100 || ethertype == 0x88a8) {
      if (d.size() < off + 4) return ParseOutcome::Truncated;
      ethertype = be16(d.data() + off + 2);
      off += 4;
    }
    if (ethertype != 0x0800) return ParseOutcome::NotTcp;
    return parse_ipv4(d, off, pkt);
  }

  ParseOutcome parse_ipv4(const std::vector<unsigned char>& d, std::size_t off,
                          PacketRecord& pkt) {
    if (d.size() < off + 20) return ParseOutcome::Truncated;
    const unsigned char* ip = d.data() + off;
    if ((ip[0] >> 4) != 4) return ParseOutcome::NotTcp;
    std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20 || d.size() < off + ihl) return ParseOutcome::Truncated;
    std::uint16_t total_len = be16(ip + 2);
    if (ip[9] != 6) return ParseOutcome::NotTcp;
    if (total_len < ihl) return ParseOutcome::Truncated;
    pkt.src.ip = be32(ip + 12);
    pkt.dst.ip = be32(ip + 16);
    return parse_tcp(d, off + ihl, total_len - ihl, pkt);
  }

  ParseOutcome parse_tcp(const std::vector<unsigned char>& d, std::size_t off,
                         std::size_t ip_payload, PacketRecord& pkt) {
    if (d.size() < off + 20) return ParseOutcome::Truncated;
    const unsigned char* tcp = d.data() + off;
    std::size_t doff = static_cast<std::size_t>(tcp[12] >> 4) * 4;
    if (doff < 20 || ip_payload < doff) return ParseOutcome::Truncated;
    pkt.src.port = be16(tcp);
    pkt.dst.port = be16(tcp + 2);
    pkt.tcp_seq = be32(tcp + 4);
    pkt.tcp_ack = be32(tcp + 8);
    pkt.flags = tcp[13] & (kTcpFin | kTcpSyn | kTcpRst | kTcpPsh | kTcpAck);
    pkt.payload_len = static_cast<std::uint32_t>(ip_payload - doff);
    return ParseOutcome::Ok;
  }

  bool read_exact(unsigned char* buf, std::size_t n) { return read_some(buf, n) == n; }

  std::size_t read_some(unsigned char* buf, std::size_t n) {
    in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount());
  }

  // record headers are in file byte order; packet contents are big-endian
  std::uint16_t u16(const unsigned char* p) const {
    std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    return swapped_ ? static_cast<std::uint16_t>((v >> 8) | (v << 8)) : v;
  }
  std::uint32_t u32(const unsigned char* p) const {
    std::uint32_t v = u32_native(p);
    if (!swapped_) return v;
    return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
  }
  static std::uint32_t u32_native(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  static std::uint16_t be16(const unsigned char* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  }
  static std::uint32_t be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
  }

  std::string path_;
  bool strict_;
  bool swapped_ = false;
  std::ifstream in_;
  PcapSkipCounters skipped_;
};

namespace detail_flow {

// Disjoint covered ranges over the 32-bit TCP sequence ring. Intervals
// that cross the wrap point are split into two linear pieces.
class SeqIntervalSet {
 public:
  std::uint64_t overlap(std::uint32_t seq, std::uint64_t len) const {
    std::uint64_t total = 0;
    for_pieces(seq, len, [&](std::uint64_t b, std::uint64_t e) { total += overlap_linear(b, e); });
    return total;
  }

  void insert(std::uint32_t seq, std::uint64_t len) {
    for_pieces(seq, len, [&](std::uint64_t b, std::uint64_t e) { insert_linear(b, e); });
  }

 private:
  static constexpr std::uint64_t kRing = 1ull << 32;

  template <typename Fn>
  static void for_pieces(std::uint32_t seq, std::uint64_t len, Fn&& fn) {
    if (len == 0) return;
    std::uint64_t b = seq;
    std::uint64_t e = b + len;
    if (e <= kRing) {
      fn(b, e);
    } else {
      fn(b, kRing);
      fn(0, e - kRing);
    }
  }

  std::uint64_t overlap_linear(std::uint64_t b, std::uint64_t e) const {
    std::uint64_t total = 0;
    auto it = ivals_.upper_bound(b);
    if (it != ivals_.begin()) --it;
    for (; it != ivals_.end() && it->first < e; ++it) {
      std::uint64_t lo = std::max(b, it->first);
      std::uint64_t hi = std::min(e, it->second);
      if (lo < hi) total += hi - lo;
    }
    return total;
  }

  void insert_linear(std::uint64_t b, std::uint64_t e) {
    auto it = ivals_.upper_bound(b);
    if (it != ivals_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= b) {
        b = prev->first;
        e = std::max(e, prev->second);
        it = ivals_.erase(prev);
      }
    }
    while (it != ivals_.end() && it->first <= e) {
      e = std::max(e, it->second);
      it = ivals_.erase(it);
    }
    ivals_.emplace(b, e);
  }

  std::map<std::uint64_t, std::uint64_t> ivals_;  // begin -> end, disjoint
};

}  // namespace detail_flow

struct FlowKey {
  Endpoint a, b;  // a is the lower endpoint by (ip, port)

  auto operator<=>(const FlowKey&) const = default;
};

inline std::string flow_key_to_string(const FlowKey& key) {
  return endpoint_to_string(key.a) + "-" + endpoint_to_string(key.b);
}

struct DirectionStats {
  std::uint64_t packets = 0;
  std::uint64_t payload_bytes = 0;  // includes retransmitted payload
  std::uint64_t retransmitted_segments = 0;
  std::uint64_t retransmitted_bytes = 0;

  bool operator==(const DirectionStats&) const = default;
};

struct TcpFlow {
  FlowKey key;
  DirectionStats a2b, b2a;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
};

struct ExperimentFlowStats {
  std::uint64_t flow_count = 0;
  std::uint64_t total_packets = 0;
  std::uint64_t total_payload_bytes = 0;  // both directions, retransmits included
  std::uint64_t total_retransmitted_bytes = 0;
  std::uint64_t server_to_client_bytes = 0;  // payload from the server side, retransmits included
};

// Groups packets into flows by canonical 5-tuple and detects
// retransmissions as any overlap with sequence space already observed in
// that direction. SYN and FIN each consume one sequence number, so
// repeated bare SYN/FIN segments count as retransmitted segments (with
// zero payload bytes).
class FlowAssembler {
 public:
  void add(const PacketRecord& pkt) {
    FlowKey key{pkt.src, pkt.dst};
    bool src_is_a = true;
    if (FlowKey{pkt.dst, pkt.src} < key) {
      key = FlowKey{pkt.dst, pkt.src};
      src_is_a = false;
    }
    auto [it, inserted] = flows_.try_emplace(key);
    FlowState& st = it->second;
    if (inserted) {
      st.flow.key = key;
      st.flow.first_ts = st.flow.last_ts = pkt.ts_ns;
    } else {
      st.flow.first_ts = std::min(st.flow.first_ts, pkt.ts_ns);
      st.flow.last_ts = std::max(st.flow.last_ts, pkt.ts_ns);
    }
    DirectionStats& dir = src_is_a ? st.flow.a2b : st.flow.b2a;
    detail_flow::SeqIntervalSet& covered = src_is_a ? st.covered_a2b : st.covered_b2a;

    ++dir.packets;
    dir.payload_bytes += pkt.payload_len;

    std::uint64_t syn = (pkt.flags & kTcpSyn) ? 1 : 0;
    std::uint64_t fin = (pkt.flags & kTcpFin) ? 1 : 0;
    std::uint64_t occupied = pkt.payload_len + syn + fin;
    if (occupied == 0) return;  // pure ACKs occupy no sequence space
    std::uint64_t seen = covered.overlap(pkt.tcp_seq, occupied);
    if (seen > 0) {
      ++dir.retransmitted_segments;
      // count only the payload portion of the overlap, not SYN/FIN slots
      std::uint32_t payload_seq = static_cast<std::uint32_t>(pkt.tcp_seq + syn);
      dir.retransmitted_bytes += covered.overlap(payload_seq, pkt.payload_len);
    }
    covered.insert(pkt.tcp_seq, occupied);
  }

  // Flows ordered by (first_ts, key) for stable output.
  std::vector<TcpFlow> take_flows() {
    std::vector<TcpFlow> out;
    out.reserve(flows_.size());
    for (auto& [key, st] : flows_) out.push_back(st.flow);
    std::sort(out.begin(), out.end(), [](const TcpFlow& x, const TcpFlow& y) {
      return std::tie(x.first_ts, x.key) < std::tie(y.first_ts, y.key);
    });
    flows_.clear();
    return out;
  }

 private:
  struct FlowState {
    TcpFlow flow;
    detail_flow::SeqIntervalSet covered_a2b, covered_b2a;
  };
  std::map<FlowKey, FlowState> flows_;
};

inline std::vector<TcpFlow> assemble_flows(const std::vector<PacketRecord>& packets) {
  FlowAssembler fa;
  for (const auto& p : packets) fa.add(p);
  return fa.take_flows();
}

inline std::vector<TcpFlow> assemble_flows(PcapReader& reader) {
  FlowAssembler fa;
  while (auto p = reader.next()) fa.add(*p);
  return fa.take_flows();
}

// Campaign-level totals. The caller names the server endpoint so the
// server-to-client byte count can be oriented; an endpoint no flow
// touches is an error (an empty capture is simply all zeros).
inline ExperimentFlowStats experiment_stats(const std::vector<TcpFlow>& flows, Endpoint server) {
  ExperimentFlowStats st;
  st.flow_count = flows.size();
  bool touched = false;
  for (const auto& f : flows) {
    st.total_packets += f.a2b.packets + f.b2a.packets;
    st.total_payload_bytes += f.a2b.payload_bytes + f.b2a.payload_bytes;
    st.total_retransmitted_bytes += f.a2b.retransmitted_bytes + f.b2a.retransmitted_bytes;
    if (f.key.a == server) {
      st.server_to_client_bytes += f.a2b.payload_bytes;
      touched = true;
    } else if (f.key.b == server) {
      st.server_to_client_bytes += f.b2a.payload_bytes;
      touched = true;
    }
  }
  if (!flows.empty() && !touched)
    throw UnknownServerEndpoint("no flow touches server endpoint " + endpoint_to_string(server));
  return st;
}

inline constexpr std::string_view kFlowCsvHeader =
    "flow_key,packets_a2b,packets_b2a,bytes_a2b,bytes_b2a,retx_segs,retx_bytes,first_ts,last_ts";

inline std::string flows_to_csv(const std::vector<TcpFlow>& flows) {
  std::ostringstream os;
  os << kFlowCsvHeader << "\n";
  for (const auto& f : flows) {
    os << flow_key_to_string(f.key) << ',' << f.a2b.packets << ',' << f.b2a.packets << ','
       << f.a2b.payload_bytes << ',' << f.b2a.payload_bytes << ','
       << f.a2b.retransmitted_segments + f.b2a.retransmitted_segments << ','
       << f.a2b.retransmitted_bytes + f.b2a.retransmitted_bytes << ',' << f.first_ts << ','
       << f.last_ts << "\n";
  }
  return os.str();
}

}  // namespace tbcmp
