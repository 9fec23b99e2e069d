#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "tbcmp/detail/io.hpp"
#include "tbcmp/detail/rng.hpp"
#include "tbcmp/detail/text.hpp"
#include "tbcmp/errors.hpp"
#include "tbcmp/trace.hpp"

// Order-N empirical Markov chains over system-call sequences. A node is an
// ordered N-tuple of call names; an arc X -> Y exists iff Y's first N-1
// calls equal X's last N-1 calls and the pair was observed. Arc weights
// are observation counts normalized per node, so every node's outgoing
// weights sum to 1.
//
// Walk probabilities accumulate in base-10 log space; the absolute
// products for realistic sequence lengths underflow any float type.

namespace tbcmp {

struct SequenceTooShort : Error {
  using Error::Error;
};
struct OrderMismatch : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct InvalidWalk : Error {
  using Error::Error;
};
struct ChainFormatError : ParseError {
  using ParseError::ParseError;
};

class MarkovChain {
 public:
  using SymbolId = std::uint32_t;
  using NodeId = std::uint32_t;

  struct Arc {
    NodeId to = 0;
    std::uint64_t count = 0;
    double weight = 0.0;
  };

  explicit MarkovChain(int order = 1) : order_(order) {
    if (order < 1) throw Error("chain order must be >= 1");
  }

  // node_ids_ keys point into nodes_; a copy must re-key against its own
  // storage. Moves keep the heap buffers, so the defaults are fine there.
  MarkovChain(const MarkovChain& other) { *this = other; }
  MarkovChain& operator=(const MarkovChain& other) {
    if (this == &other) return *this;
    order_ = other.order_;
    symbols_ = other.symbols_;
    symbol_ids_ = other.symbol_ids_;
    nodes_ = other.nodes_;
    start_ = other.start_;
    total_transitions_ = other.total_transitions_;
    node_ids_.clear();
    node_ids_.reserve(nodes_.size());
    for (NodeId i = 0; i < nodes_.size(); ++i)
      node_ids_.emplace(Key{nodes_[i].gram.data(), nodes_[i].gram.size()}, i);
    return *this;
  }
  MarkovChain(MarkovChain&&) = default;
  MarkovChain& operator=(MarkovChain&&) = default;

  int order() const { return order_; }
  bool empty() const { return nodes_.empty(); }
  std::size_t node_count() const { return nodes_.size(); }
  std::uint64_t total_transitions() const { return total_transitions_; }

  std::size_t arc_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes_) n += node.arcs.size();
    return n;
  }

  const std::string& symbol_name(SymbolId id) const { return symbols_[id]; }

  std::vector<std::string> gram(NodeId id) const {
    std::vector<std::string> out;
    out.reserve(nodes_[id].gram.size());
    for (SymbolId s : nodes_[id].gram) out.push_back(symbols_[s]);
    return out;
  }

  // Node label: the N calls joined with '|' (a bare call name for N=1).
  std::string label(NodeId id) const {
    std::string out;
    for (std::size_t i = 0; i < nodes_[id].gram.size(); ++i) {
      if (i > 0) out += '|';
      out += symbols_[nodes_[id].gram[i]];
    }
    return out;
  }

  std::optional<SymbolId> find_symbol(std::string_view name) const {
    auto it = symbol_ids_.find(std::string(name));
    if (it == symbol_ids_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<NodeId> find_node(std::span<const SymbolId> gram_ids) const {
    auto it = node_ids_.find(Key{gram_ids.data(), gram_ids.size()});
    if (it == node_ids_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<NodeId> find_node(std::span<const std::string> gram_names) const {
    std::vector<SymbolId> ids;
    ids.reserve(gram_names.size());
    for (const auto& name : gram_names) {
      auto sid = find_symbol(name);
      if (!sid) return std::nullopt;
      ids.push_back(*sid);
    }
    return find_node(ids);
  }

  const std::vector<Arc>& arcs(NodeId id) const { return nodes_[id].arcs; }
  std::uint64_t out_total(NodeId id) const { return nodes_[id].out_total; }

  // Last call of a node's gram: the call a transition into it appends.
  const std::string& gram_last(NodeId id) const { return symbols_[nodes_[id].gram.back()]; }

  std::optional<NodeId> start_node() const { return start_; }
  void set_start(NodeId id) { start_ = id; }

  struct ArcLookup {
    std::uint64_t count = 0;
    std::uint64_t from_total = 0;
    double weight = 0.0;
  };

  // Exact count and row total for one arc, by call names. This is the
  // query surface the rational-arithmetic test oracle uses.
  std::optional<ArcLookup> find_arc(std::span<const std::string> from,
                                    std::span<const std::string> to) const {
    auto f = find_node(from);
    auto t = find_node(to);
    if (!f || !t) return std::nullopt;
    for (const Arc& a : nodes_[*f].arcs)
      if (a.to == *t) return ArcLookup{a.count, nodes_[*f].out_total, a.weight};
    return std::nullopt;
  }

  SymbolId intern_symbol(std::string_view name) {
    auto it = symbol_ids_.find(std::string(name));
    if (it != symbol_ids_.end()) return it->second;
    SymbolId id = static_cast<SymbolId>(symbols_.size());
    symbols_.emplace_back(name);
    symbol_ids_.emplace(symbols_.back(), id);
    return id;
  }

  NodeId intern_node(std::span<const SymbolId> gram_ids) {
    if (gram_ids.size() != static_cast<std::size_t>(order_))
      throw Error("node gram length does not match chain order");
    auto it = node_ids_.find(Key{gram_ids.data(), gram_ids.size()});
    if (it != node_ids_.end()) return it->second;
    NodeId id = static_cast<NodeId>(nodes_.size());
    Node node;
    node.gram.assign(gram_ids.begin(), gram_ids.end());
    nodes_.push_back(std::move(node));
    node_ids_.emplace(Key{nodes_[id].gram.data(), nodes_[id].gram.size()}, id);
    return id;
  }

  NodeId intern_node(std::span<const std::string> gram_names) {
    std::vector<SymbolId> ids;
    ids.reserve(gram_names.size());
    for (const auto& name : gram_names) ids.push_back(intern_symbol(name));
    return intern_node(ids);
  }

  void add_count(NodeId from, NodeId to, std::uint64_t count) {
    if (count == 0) throw Error("arc count must be >= 1");
    if (order_ > 1) {
      const auto& fg = nodes_[from].gram;
      const auto& tg = nodes_[to].gram;
      for (int i = 1; i < order_; ++i)
        if (fg[static_cast<std::size_t>(i)] != tg[static_cast<std::size_t>(i) - 1])
          throw Error("arc violates n-gram overlap: " + label(from) + " -> " + label(to));
    }
    for (Arc& a : nodes_[from].arcs) {
      if (a.to == to) {
        a.count += count;
        return;
      }
    }
    nodes_[from].arcs.push_back(Arc{to, count, 0.0});
  }

  // Sorts arcs lexicographically by successor label, recomputes weights
  // and totals. Call after the last add_count.
  void finalize() {
    total_transitions_ = 0;
    for (auto& node : nodes_) {
      std::sort(node.arcs.begin(), node.arcs.end(),
                [this](const Arc& x, const Arc& y) { return gram_less(x.to, y.to); });
      node.out_total = 0;
      for (const Arc& a : node.arcs) node.out_total += a.count;
      for (Arc& a : node.arcs)
        a.weight = static_cast<double>(a.count) / static_cast<double>(node.out_total);
      total_transitions_ += node.out_total;
    }
  }

  // Node ids sorted by label; export order for serialization and DOT.
  std::vector<NodeId> nodes_by_label() const {
    std::vector<NodeId> ids(nodes_.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<NodeId>(i);
    std::sort(ids.begin(), ids.end(), [this](NodeId a, NodeId b) { return gram_less(a, b); });
    return ids;
  }

 private:
  struct Node {
    std::vector<SymbolId> gram;
    std::vector<Arc> arcs;
    std::uint64_t out_total = 0;
  };

  // Non-owning key over a gram; points into the owning Node once interned.
  struct Key {
    const SymbolId* data;
    std::size_t size;
    bool operator==(const Key& o) const {
      return size == o.size && std::equal(data, data + size, o.data);
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (std::size_t i = 0; i < k.size; ++i) {
        h ^= k.data[i];
        h *= 1099511628211ull;
      }
      return static_cast<std::size_t>(h);
    }
  };

  bool gram_less(NodeId a, NodeId b) const {
    const auto& ga = nodes_[a].gram;
    const auto& gb = nodes_[b].gram;
    for (std::size_t i = 0; i < ga.size() && i < gb.size(); ++i) {
      int c = symbols_[ga[i]].compare(symbols_[gb[i]]);
      if (c != 0) return c < 0;
    }
    return ga.size() < gb.size();
  }

  int order_ = 1;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, SymbolId> symbol_ids_;
  std::vector<Node> nodes_;
  std::unordered_map<Key, NodeId, KeyHash> node_ids_;
  std::optional<NodeId> start_;
  std::uint64_t total_transitions_ = 0;
};

// Builds the order-N chain of a sequence: one node per distinct N-gram,
// arc counts from consecutive N-gram pairs, start state at the first gram.
inline MarkovChain build_chain(const CallSequence& seq, int order) {
  if (order < 1) throw Error("chain order must be >= 1");
  const auto& calls = seq.calls;
  if (calls.size() < static_cast<std::size_t>(order) + 1)
    throw SequenceTooShort("sequence of length " + std::to_string(calls.size()) +
                           " cannot build an order-" + std::to_string(order) + " chain");
  MarkovChain chain(order);
  std::vector<MarkovChain::SymbolId> ids;
  ids.reserve(calls.size());
  for (const auto& c : calls) ids.push_back(chain.intern_symbol(c));

  std::vector<MarkovChain::SymbolId> window(ids.begin(), ids.begin() + order);
  MarkovChain::NodeId prev = chain.intern_node(window);
  chain.set_start(prev);
  for (std::size_t i = static_cast<std::size_t>(order); i < ids.size(); ++i) {
    window.erase(window.begin());
    window.push_back(ids[i]);
    MarkovChain::NodeId cur = chain.intern_node(window);
    chain.add_count(prev, cur, 1);
    prev = cur;
  }
  chain.finalize();
  return chain;
}

// Sums arc counts across chains of equal order and renormalizes. The
// merged start state is the first chain's.
inline MarkovChain merge_chains(const std::vector<MarkovChain>& chains) {
  if (chains.empty()) throw EmptyInput("merge_chains: no chains given");
  int order = chains.front().order();
  for (const auto& ch : chains)
    if (ch.order() != order)
      throw OrderMismatch("merge_chains: order " + std::to_string(ch.order()) +
                          " != " + std::to_string(order));
  MarkovChain out(order);
  for (const auto& ch : chains) {
    for (MarkovChain::NodeId n = 0; n < ch.node_count(); ++n) {
      auto from_gram = ch.gram(n);
      MarkovChain::NodeId from = out.intern_node(from_gram);
      for (const auto& a : ch.arcs(n)) {
        auto to_gram = ch.gram(a.to);
        out.add_count(from, out.intern_node(to_gram), a.count);
      }
    }
  }
  if (auto s = chains.front().start_node()) {
    auto g = chains.front().gram(*s);
    out.set_start(out.intern_node(g));
  }
  out.finalize();
  return out;
}

// Drops arcs with weight < threshold and renormalizes each node's
// remaining weights. A node whose every arc falls below the threshold
// keeps its single highest-weight arc (ties to the lexicographically
// smallest successor) so the chain stays walkable. Nodes left with no
// incident arcs disappear.
inline MarkovChain prune(const MarkovChain& chain, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw Error("prune threshold must be in [0, 1)");
  MarkovChain out(chain.order());
  for (MarkovChain::NodeId n = 0; n < chain.node_count(); ++n) {
    const auto& arcs = chain.arcs(n);
    if (arcs.empty()) continue;
    std::vector<const MarkovChain::Arc*> kept;
    for (const auto& a : arcs)
      if (a.weight >= threshold) kept.push_back(&a);
    if (kept.empty()) {
      // arcs are sorted by successor label, so max_element keeps the
      // lexicographically smallest successor among equal weights
      const MarkovChain::Arc* best = &arcs.front();
      for (const auto& a : arcs)
        if (a.weight > best->weight) best = &a;
      kept.push_back(best);
    }
    auto from_gram = chain.gram(n);
    MarkovChain::NodeId from = out.intern_node(from_gram);
    for (const auto* a : kept) {
      auto to_gram = chain.gram(a->to);
      out.add_count(from, out.intern_node(to_gram), a->count);
    }
  }
  if (auto s = chain.start_node()) {
    auto g = chain.gram(*s);
    if (auto kept_start = out.find_node(g)) out.set_start(*kept_start);
  }
  out.finalize();
  return out;
}

struct InvalidTransition {
  std::uint64_t position = 0;  // index of the n-gram being entered
  std::string from_label;      // empty for a missing start state
  std::string to_label;

  bool operator==(const InvalidTransition&) const = default;
};

struct WalkResult {
  std::uint64_t sequence_length = 0;
  std::uint64_t transitions = 0;  // sequence_length - order
  std::vector<InvalidTransition> invalid_transitions;
  std::optional<double> log10_prob;  // defined only when no invalid transitions

  bool valid() const { return invalid_transitions.empty() && log10_prob.has_value(); }
};

// Replays a sequence over a chain. The walk anchors at the sequence's
// first N-gram and checks every consecutive N-gram pair against the
// chain's arcs. Entering an n-gram fails when the previous gram is not a
// node or has no arc to it; each failure appends an invalid-transition
// record and the walk re-anchors at the gram just entered. A missing
// start state is recorded at position 0. The probability is the product
// of traversed arc weights, kept as a base-10 logarithm, and is defined
// only for walks with no invalid transitions.
inline WalkResult walk(const MarkovChain& chain, const CallSequence& seq) {
  const auto order = static_cast<std::size_t>(chain.order());
  if (seq.calls.size() < order)
    throw SequenceTooShort("walk: sequence length " + std::to_string(seq.calls.size()) +
                           " < order " + std::to_string(order));
  WalkResult result;
  result.sequence_length = seq.calls.size();
  result.transitions = seq.calls.size() - order;

  constexpr MarkovChain::SymbolId kUnknown = std::numeric_limits<MarkovChain::SymbolId>::max();
  std::vector<MarkovChain::SymbolId> ids;
  ids.reserve(seq.calls.size());
  for (const auto& c : seq.calls) {
    auto sid = chain.find_symbol(c);
    ids.push_back(sid ? *sid : kUnknown);
  }

  auto gram_label = [&](std::size_t pos) {
    std::string out;
    for (std::size_t i = 0; i < order; ++i) {
      if (i > 0) out += '|';
      out += seq.calls[pos + i];
    }
    return out;
  };
  auto node_at = [&](std::size_t pos) -> std::optional<MarkovChain::NodeId> {
    std::span<const MarkovChain::SymbolId> window(ids.data() + pos, order);
    for (auto id : window)
      if (id == kUnknown) return std::nullopt;
    return chain.find_node(window);
  };

  std::optional<MarkovChain::NodeId> prev = node_at(0);
  if (!prev) result.invalid_transitions.push_back({0, "", gram_label(0)});

  double log_sum = 0.0;
  for (std::uint64_t k = 0; k < result.transitions; ++k) {
    std::size_t next_pos = static_cast<std::size_t>(k) + 1;
    std::optional<MarkovChain::NodeId> cur = node_at(next_pos);
    const MarkovChain::Arc* arc = nullptr;
    if (prev && cur) {
      for (const auto& a : chain.arcs(*prev)) {
        if (a.to == *cur) {
          arc = &a;
          break;
        }
      }
    }
    if (arc != nullptr) {
      log_sum += std::log10(arc->weight);
    } else {
      result.invalid_transitions.push_back(
          {next_pos, gram_label(next_pos - 1), gram_label(next_pos)});
    }
    prev = cur;
  }
  if (result.invalid_transitions.empty()) result.log10_prob = log_sum;
  return result;
}

// log10 P(candidate) - log10 P(baseline); positive means the candidate
// sequence is the more probable one under its chain. Only valid walks of
// equal-length sequences compare meaningfully.
inline double relative_log10(const WalkResult& candidate, const WalkResult& baseline) {
  if (!candidate.valid() || !baseline.valid())
    throw InvalidWalk("relative_log10 requires walks with no invalid transitions");
  if (candidate.sequence_length != baseline.sequence_length)
    throw LengthMismatch("relative_log10: sequence lengths " +
                         std::to_string(candidate.sequence_length) + " and " +
                         std::to_string(baseline.sequence_length) + " differ");
  return *candidate.log10_prob - *baseline.log10_prob;
}

struct InvalidMatrix {
  std::vector<std::vector<std::uint64_t>> counts;  // [chain][sequence]
  std::vector<std::uint64_t> sequence_totals;      // per sequence, summed over chains
  std::uint64_t total = 0;
};

inline InvalidMatrix count_invalid(const std::vector<MarkovChain>& chains,
                                   const std::vector<CallSequence>& sequences) {
  InvalidMatrix m;
  m.counts.resize(chains.size());
  m.sequence_totals.assign(sequences.size(), 0);
  for (std::size_t i = 0; i < chains.size(); ++i) {
    m.counts[i].resize(sequences.size());
    for (std::size_t j = 0; j < sequences.size(); ++j) {
      std::uint64_t n = walk(chains[i], sequences[j]).invalid_transitions.size();
      m.counts[i][j] = n;
      m.sequence_totals[j] += n;
      m.total += n;
    }
  }
  return m;
}

struct GeneratedSequence {
  CallSequence sequence;
  bool hit_dead_end = false;  // a node with no outgoing arcs ended the walk early
};

// Pseudo-random walk from the chain's start node. Successors are chosen
// by cumulative-weight inverse sampling over the lexicographically sorted
// arcs, so the same seed reproduces the same sequence on any platform.
inline GeneratedSequence generate(const MarkovChain& chain, std::size_t length,
                                  std::uint64_t seed) {
  if (chain.empty()) throw EmptyInput("generate: chain has no nodes");
  if (!chain.start_node()) throw Error("generate: chain has no start node");
  if (length < static_cast<std::size_t>(chain.order()))
    throw SequenceTooShort("generate: length " + std::to_string(length) + " < order " +
                           std::to_string(chain.order()));
  detail::Rng rng(seed);
  GeneratedSequence out;
  out.sequence.source_id = "generated:seed=" + std::to_string(seed);

  MarkovChain::NodeId cur = *chain.start_node();
  for (const auto& name : chain.gram(cur)) out.sequence.calls.push_back(name);
  while (out.sequence.calls.size() < length) {
    const auto& arcs = chain.arcs(cur);
    if (arcs.empty()) {
      out.hit_dead_end = true;
      break;
    }
    double u = rng.unit();
    double acc = 0.0;
    const MarkovChain::Arc* pick = &arcs.back();
    for (const auto& a : arcs) {
      acc += a.weight;
      if (u < acc) {
        pick = &a;
        break;
      }
    }
    cur = pick->to;
    out.sequence.calls.push_back(chain.gram_last(cur));
  }
  return out;
}

// DOT export with lexicographic node and edge order so two exports of the
// same chain diff cleanly. The start state is drawn with a heavy border.
inline std::string to_dot(const MarkovChain& chain) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += '"';
    return out;
  };
  std::ostringstream os;
  os << "digraph markov {\n";
  if (!chain.empty()) os << "  rankdir=LR;\n";
  auto order = chain.nodes_by_label();
  for (auto id : order) {
    os << "  " << quote(chain.label(id));
    if (chain.start_node() && *chain.start_node() == id) os << " [penwidth=2]";
    os << ";\n";
  }
  for (auto id : order) {
    for (const auto& a : chain.arcs(id)) {
      os << "  " << quote(chain.label(id)) << " -> " << quote(chain.label(a.to)) << " [label=\""
         << detail::format_fixed(a.weight, 3) << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

// --- chain text format -----------------------------------------------------
//
// Header `markov v1 order=N`, then one line per arc:
//   from-label <TAB> to-label <TAB> count
// Weights are derived from counts on load. Arcs are written in
// lexicographic order; on load the start state anchors at the first arc
// line's from-node (the format itself does not carry the start state).

inline std::string serialize_chain(const MarkovChain& chain) {
  std::ostringstream os;
  os << "markov v1 order=" << chain.order() << "\n";
  for (auto id : chain.nodes_by_label()) {
    for (const auto& a : chain.arcs(id))
      os << chain.label(id) << '\t' << chain.label(a.to) << '\t' << a.count << "\n";
  }
  return os.str();
}

inline MarkovChain parse_chain(std::string_view text) {
  std::optional<MarkovChain> chain;
  bool have_start = false;
  detail::for_each_line(text, [&](std::uint64_t line_no, std::string_view line) {
    if (line_no == 1) {
      auto fields = detail::split(std::string_view(detail::trim(line)), ' ');
      int order = 0;
      if (fields.size() != 3 || fields[0] != "markov" || fields[1] != "v1" ||
          !fields[2].starts_with("order=") ||
          !detail::parse_int(fields[2].substr(6), order) || order < 1)
        throw ChainFormatError("bad chain header: '" + std::string(line) + "'");
      chain.emplace(order);
      return;
    }
    if (detail::trim(line).empty()) return;
    auto fields = detail::split(line, '\t');
    std::uint64_t count = 0;
    if (fields.size() != 3 || !detail::parse_int(fields[2], count) || count == 0)
      throw ChainFormatError("bad arc at line " + std::to_string(line_no) + ": '" +
                             std::string(line) + "'");
    auto parse_gram = [&](std::string_view label) {
      std::vector<std::string> gram;
      for (auto part : detail::split(label, '|')) gram.emplace_back(part);
      if (gram.size() != static_cast<std::size_t>(chain->order()))
        throw ChainFormatError("label '" + std::string(label) + "' is not an order-" +
                               std::to_string(chain->order()) + " gram (line " +
                               std::to_string(line_no) + ")");
      for (const auto& g : gram)
        if (g.empty())
          throw ChainFormatError("empty call name in label at line " + std::to_string(line_no));
      return gram;
    };
    auto from_gram = parse_gram(fields[0]);
    auto to_gram = parse_gram(fields[1]);
    MarkovChain::NodeId from = chain->intern_node(from_gram);
    MarkovChain::NodeId to = chain->intern_node(to_gram);
    try {
      chain->add_count(from, to, count);
    } catch (const Error& e) {
      throw ChainFormatError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
    if (!have_start) {
      chain->set_start(from);
      have_start = true;
    }
  });
  if (!chain) throw ChainFormatError("empty chain file");
  chain->finalize();
  return *chain;
}

inline void save_chain(const MarkovChain& chain, const std::filesystem::path& path) {
  detail::write_file(path, serialize_chain(chain));
}

inline MarkovChain load_chain(const std::filesystem::path& path) {
  return parse_chain(detail::read_file(path));
}

// Builds a chain directly from (from-label, to-label, count) triples;
// labels use the '|' join for orders above 1. Start state defaults to the
// first triple's from-node.
inline MarkovChain make_chain(
    int order, const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& arcs,
    const std::string& start_label = "") {
  MarkovChain chain(order);
  auto to_gram = [&](const std::string& label) {
    std::vector<std::string> gram;
    for (auto part : detail::split(label, '|')) gram.emplace_back(part);
    return gram;
  };
  std::optional<MarkovChain::NodeId> start;
  for (const auto& [from, to, count] : arcs) {
    auto fg = to_gram(from);
    auto tg = to_gram(to);
    MarkovChain::NodeId f = chain.intern_node(fg);
    chain.add_count(f, chain.intern_node(tg), count);
    if (!start) start = f;
    if (!start_label.empty() && from == start_label) start = f;
  }
  if (start) chain.set_start(*start);
  chain.finalize();
  return chain;
}

}  // namespace tbcmp
