// Acceptance suite: end-to-end checks of the comparison toolkit against
// its worked examples and closed-form oracles. Each criterion prints one
// PASS/FAIL line with its runtime; the binary exits nonzero if any fail.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbcmp/tbcmp.hpp"

#ifndef TBCMP_CLI_PATH
#error "TBCMP_CLI_PATH must point at the tbcmp binary"
#endif

namespace fs = std::filesystem;
using namespace tbcmp;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw CheckFailure(what);
}

void check_close(double actual, double expected, double tol, const std::string& what) {
  if (!(std::fabs(actual - expected) <= tol))
    throw CheckFailure(what + ": got " + std::to_string(actual) + ", want " +
                       std::to_string(expected) + " +/- " + std::to_string(tol));
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string("'") + TBCMP_CLI_PATH + "' " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  check(pipe != nullptr, "popen failed for: " + cmd);
  CliResult result;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) result.output.append(buf, n);
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

// pulls "key=value" style fields out of CLI stdout
std::string output_field(const std::string& text, const std::string& key) {
  auto pos = text.find(key + "=");
  check(pos != std::string::npos, "missing '" + key + "=' in CLI output: " + text);
  pos += key.size() + 1;
  auto end = text.find_first_of(" \n", pos);
  return text.substr(pos, end - pos);
}

fs::path scratch_root() {
  static fs::path root = [] {
    fs::path p =
        fs::temp_directory_path() / ("tbcmp_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return root;
}

MarkovChain worked_example_chain() {
  return make_chain(1,
                    {{"open", "error", 1}, {"open", "read", 99}, {"read", "read", 75},
                     {"read", "close", 25}},
                    "open");
}

CallSequence sequence_of(std::vector<std::string> calls) {
  CallSequence seq;
  seq.source_id = "acceptance";
  seq.calls = std::move(calls);
  return seq;
}

void write_trace_lines(const fs::path& path, const std::vector<std::string>& calls,
                       const std::string& process) {
  std::ostringstream os;
  std::uint64_t ev = 1;
  std::int64_t ts = 1'000'000'000;
  for (const auto& call : calls) {
    os << ev++ << ' ' << ts << " 0 " << process << " (1000) > " << call << '\n';
    ts += 1000;
  }
  detail::write_file(path, os.str());
}

// --- criteria ----------------------------------------------------------------

void criterion_worked_walks() {
  MarkovChain chain = worked_example_chain();

  WalkResult reads = walk(chain, sequence_of({"open", "read", "read", "read"}));
  check(reads.valid(), "walk (open,read,read,read) must be valid");
  check_close(std::pow(10.0, *reads.log10_prob), 0.99 * 0.75 * 0.75, 1e-12,
              "P(open,read,read,read)");

  WalkResult closed = walk(chain, sequence_of({"open", "read", "read", "close"}));
  check(closed.valid(), "walk (open,read,read,close) must be valid");
  check_close(std::pow(10.0, *closed.log10_prob), 0.99 * 0.75 * 0.25, 1e-12,
              "P(open,read,read,close)");
}

void criterion_ordering_claim() {
  MarkovChain chain = worked_example_chain();
  // 0.99 * 0.75^16: seventeen transitions of the most probable kind
  std::vector<std::string> calls{"open"};
  for (int i = 0; i < 17; ++i) calls.push_back("read");
  WalkResult best = walk(chain, sequence_of(calls));
  WalkResult error_walk = walk(chain, sequence_of({"open", "error"}));
  check(best.valid() && error_walk.valid(), "both walks must be valid");

  double p_best = std::pow(10.0, *best.log10_prob);
  double p_error = std::pow(10.0, *error_walk.log10_prob);
  check_close(p_best, 0.99 * std::pow(0.75, 16), 1e-12, "P(open + 17 reads)");
  check_close(p_error, 0.01, 1e-12, "P(open,error)");
  check(0.99 * std::pow(0.75, 16) < 0.01, "0.99 * 0.75^16 < 0.01");
  check(p_best < p_error, "computed walk ordering must match the closed form");
}

void criterion_round_trip_recovery() {
  // fixed generator chain; every true weight is at least 0.05
  MarkovChain truth = make_chain(1, {{"a", "b", 60},
                                     {"a", "c", 25},
                                     {"a", "d", 15},
                                     {"b", "a", 10},
                                     {"b", "b", 50},
                                     {"b", "c", 40},
                                     {"c", "a", 70},
                                     {"c", "d", 30},
                                     {"d", "a", 100}});
  GeneratedSequence gen = generate(truth, 100000, 20240601);
  check(!gen.hit_dead_end, "generator must not dead-end");
  check(gen.sequence.size() == 100000, "generated sequence length");

  MarkovChain rebuilt = build_chain(gen.sequence, 1);
  check(rebuilt.arc_count() == truth.arc_count(), "rebuilt chain must have every true arc only");
  double max_err = 0.0;
  for (MarkovChain::NodeId n = 0; n < truth.node_count(); ++n) {
    auto from = truth.gram(n);
    for (const auto& arc : truth.arcs(n)) {
      auto to = truth.gram(arc.to);
      auto found = rebuilt.find_arc(from, to);
      check(found.has_value(), "missing rebuilt arc " + from[0] + " -> " + to[0]);
      max_err = std::max(max_err, std::fabs(found->weight - arc.weight));
    }
  }
  check(max_err <= 0.01, "max rebuilt weight error " + std::to_string(max_err) + " > 0.01");
}

void criterion_walk_vs_oracle() {
  detail::Rng rng(424242);
  for (int c = 0; c < 1000; ++c) {
    std::size_t alphabet = 2 + rng.below(2);  // up to 9 nodes at order 2
    int order = 1 + static_cast<int>(rng.below(2));
    std::size_t build_len = static_cast<std::size_t>(order) + 2 + rng.below(60);
    std::vector<std::string> calls;
    for (std::size_t i = 0; i < build_len; ++i)
      calls.push_back(std::string(1, static_cast<char>('a' + rng.below(alphabet))));
    MarkovChain chain = build_chain(sequence_of(calls), order);
    check(chain.node_count() <= 10, "random chain must stay small");

    std::size_t walk_len = static_cast<std::size_t>(order) + rng.below(20 - order) + 0;
    std::vector<std::string> walked;
    for (std::size_t i = 0; i < walk_len; ++i) {
      if (rng.below(12) == 0)
        walked.push_back("z");
      else
        walked.push_back(std::string(1, static_cast<char>('a' + rng.below(alphabet))));
    }
    CallSequence seq = sequence_of(walked);
    WalkResult w = walk(chain, seq);
    ExactWalkOracle oracle = exact_walk(chain, seq);
    check(w.invalid_transitions.size() == oracle.invalid_count,
          "invalid-transition counts must match exactly (case " + std::to_string(c) + ")");
    if (w.valid()) {
      double diff = std::fabs(*w.log10_prob - oracle.log10_prob());
      check(diff < 1e-9, "log10 walk/oracle gap " + std::to_string(diff) + " (case " +
                             std::to_string(c) + ")");
    }
  }
}

void criterion_prune_renormalizes() {
  detail::Rng rng(11235);
  for (int c = 0; c < 1000; ++c) {
    std::size_t alphabet = 2 + rng.below(7);
    std::size_t len = 20 + rng.below(400);
    std::vector<std::string> calls;
    for (std::size_t i = 0; i < len; ++i)
      calls.push_back(std::string(1, static_cast<char>('a' + rng.below(alphabet))));
    MarkovChain pruned = prune(build_chain(sequence_of(calls), 1), 0.001);
    for (MarkovChain::NodeId n = 0; n < pruned.node_count(); ++n) {
      const auto& arcs = pruned.arcs(n);
      if (arcs.empty()) continue;
      double sum = 0.0;
      for (const auto& a : arcs) sum += a.weight;
      check(std::fabs(sum - 1.0) < 1e-9,
            "outgoing weights must renormalize to 1 (case " + std::to_string(c) + ")");
    }
  }
}

void criterion_self_walk() {
  // alternating pattern with no repeated-call pairs
  std::vector<std::string> calls;
  for (int i = 0; i < 50; ++i)
    for (const char* c : {"a", "b", "a", "c", "a", "d"}) calls.push_back(c);
  CallSequence s = sequence_of(calls);
  MarkovChain chain = build_chain(s, 1);
  check(walk(chain, s).invalid_transitions.empty(), "self-walk must have 0 invalid transitions");

  // duplicating one 'a' forms the unseen pair (a,a) and nothing else
  std::vector<std::string> injected = calls;
  std::size_t at = 30;  // calls[30] == "a" by construction
  check(calls[at] == "a", "injection site must hold an 'a'");
  injected.insert(injected.begin() + static_cast<std::ptrdiff_t>(at), "a");
  WalkResult w = walk(chain, sequence_of(injected));
  check(w.invalid_transitions.size() == 1, "exactly one injected invalid transition");
  check(w.invalid_transitions[0].position == at + 1,
        "invalid transition must land at the injected pair");
  check(w.invalid_transitions[0].from_label == "a" && w.invalid_transitions[0].to_label == "a",
        "invalid transition must name the injected pair");
}

void criterion_flow_exactness() {
  detail::Rng rng(777001);
  fs::path dir = scratch_root() / "flows";
  fs::create_directories(dir);
  const Endpoint server{0x0a000002, 80};
  for (int c = 0; c < 20; ++c) {
    std::size_t flow_count = 1 + rng.below(10);
    std::size_t dups_left = rng.below(11);
    std::vector<FlowSpec> specs;
    for (std::size_t f = 0; f < flow_count; ++f) {
      FlowSpec spec;
      spec.client = Endpoint{0x0a000001, static_cast<std::uint16_t>(41000 + f)};
      spec.server = server;
      spec.handshake = rng.below(4) != 0;
      spec.teardown = rng.below(4) != 0;
      std::size_t segments = rng.below(11);  // <= 10 per flow, <= 100 per capture
      for (std::size_t s = 0; s < segments; ++s) {
        bool dup = dups_left > 0 && rng.below(8) == 0;
        if (dup) --dups_left;
        spec.segments.push_back({rng.below(2) ? SegmentDirection::ClientToServer
                                              : SegmentDirection::ServerToClient,
                                 static_cast<std::uint32_t>(rng.below(1501)), dup});
      }
      specs.push_back(std::move(spec));
    }

    fs::path path = dir / ("cap" + std::to_string(c) + ".pcap");
    synth_pcap_file(path, specs, 9000 + static_cast<std::uint64_t>(c));

    PcapReader reader(path.string());
    std::vector<TcpFlow> flows = assemble_flows(reader);
    std::map<FlowKey, const TcpFlow*> by_key;
    for (const auto& f : flows) by_key[f.key] = &f;

    std::size_t expected_flows = 0;
    for (const auto& spec : specs) {
      TcpFlow expect = expected_flow(spec);
      if (expect.a2b.packets + expect.b2a.packets == 0) {
        check(by_key.find(expect.key) == by_key.end(), "empty spec must produce no flow");
        continue;
      }
      ++expected_flows;
      auto it = by_key.find(expect.key);
      check(it != by_key.end(), "flow missing for " + flow_key_to_string(expect.key));
      check(it->second->a2b == expect.a2b && it->second->b2a == expect.b2a,
            "per-flow counters must match the closed form exactly (capture " +
                std::to_string(c) + ", flow " + flow_key_to_string(expect.key) + ")");
    }
    check(flows.size() == expected_flows, "assembled flow count must match the closed form");

    ExperimentFlowStats got = experiment_stats(flows, server);
    ExperimentFlowStats want = expected_capture_stats(specs, server);
    check(got.flow_count == want.flow_count && got.total_packets == want.total_packets &&
              got.total_payload_bytes == want.total_payload_bytes &&
              got.total_retransmitted_bytes == want.total_retransmitted_bytes &&
              got.server_to_client_bytes == want.server_to_client_bytes,
          "experiment stats must match the closed form exactly (capture " + std::to_string(c) +
              ")");
  }
}

void criterion_statistics() {
  ConfidenceInterval constant = confidence_interval(SampleSet{"const", {7, 7, 7, 7, 7}});
  check(constant.half_width == 0.0, "constant samples must have a zero-width interval");

  ConfidenceInterval grid = confidence_interval(SampleSet{"grid", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}});
  check_close(grid.mean, 5.5, 1e-9, "mean of 1..10");
  check_close(grid.half_width, 1.959964 * std::sqrt(55.0 / 6.0) / std::sqrt(10.0), 1e-9,
              "half width of 1..10");

  SampleSet baseline{"rps", {14400, 14440}};
  Verdict close_v = similarity(baseline, SampleSet{"rps", {13580, 13600}});
  check(close_v.similar, "means 14420 vs 13590 must be similar");
  check_close(close_v.relative_diff, 830.0 / 14420.0, 1e-9, "relative diff 14420 vs 13590");

  Verdict far_v = similarity(baseline, SampleSet{"rps", {6470, 6482}});
  check(!far_v.similar, "means 14420 vs 6476 must not be similar");
  check_close(far_v.relative_diff, 7944.0 / 14420.0, 1e-9, "relative diff 14420 vs 6476");
}

void criterion_end_to_end() {
  fs::path dir = scratch_root() / "e2e";
  fs::create_directories(dir);

  CampaignSynthSpec spec;
  spec.runs = 10;
  spec.sequence_length = 6000;
  spec.campaign_id = "baseline";
  spec.seed = 1000;
  fs::path base_manifest = synth_campaign(spec, dir / "baseline");
  spec.campaign_id = "candidate";
  spec.seed = 2000;
  fs::path cand_manifest = synth_campaign(spec, dir / "candidate");
  spec.campaign_id = "perturbed";
  spec.seed = 2000;
  spec.weight_perturbation = 0.30;
  fs::path pert_manifest = synth_campaign(spec, dir / "perturbed");

  std::string common = " --skip 500 --limit 4000 --format json,csv,dot";
  auto compare = [&](const fs::path& cand, const fs::path& out) {
    CliResult r = run_cli("compare --baseline '" + base_manifest.string() + "' --candidate '" +
                          cand.string() + "' --out '" + out.string() + "'" + common);
    check(r.exit_code == 0, "compare must exit 0, got " + std::to_string(r.exit_code) + "\n" +
                                r.output);
  };
  compare(cand_manifest, dir / "out1");
  compare(cand_manifest, dir / "out2");

  // byte-identical artifacts across the two invocations
  std::map<std::string, std::string> files1, files2;
  for (const auto& entry : fs::directory_iterator(dir / "out1"))
    files1[entry.path().filename().string()] = detail::read_file(entry.path());
  for (const auto& entry : fs::directory_iterator(dir / "out2"))
    files2[entry.path().filename().string()] = detail::read_file(entry.path());
  check(!files1.empty(), "compare must write artifacts");
  check(files1 == files2, "repeated compare runs must be byte-identical");

  auto report = nlohmann::json::parse(files1.at("report.json"));
  check(report.at("cells").size() == 1, "one payload/link cell expected");
  std::size_t metrics_seen = 0;
  for (const auto& cell : report.at("cells")) {
    for (const auto& metric : cell.at("metrics")) {
      ++metrics_seen;
      check(metric.at("verdict").at("similar").get<bool>(),
            "identical-spec campaigns must be similar on " +
                metric.at("name").get<std::string>());
    }
  }
  check(metrics_seen == 5, "five metrics per cell");

  // perturbing the candidate generator must move the markov section
  // well beyond the identity comparison's sampling noise
  auto rel_of = [](const nlohmann::json& markov, const char* variant) {
    const auto& v = markov.at(variant).at("mean_relative_log10");
    return v.is_null() ? 0.0 : v.get<double>();
  };
  const auto& identity_markov = report.at("cells").at(0).at("markov");

  compare(pert_manifest, dir / "out3");
  auto perturbed = nlohmann::json::parse(detail::read_file(dir / "out3" / "report.json"));
  const auto& markov = perturbed.at("cells").at(0).at("markov");
  std::uint64_t invalids =
      markov.at("no_skip").at("candidate").at("invalid_transitions").get<std::uint64_t>();
  double moved = std::fabs(rel_of(markov, "no_skip") - rel_of(identity_markov, "no_skip"));
  check(invalids > 0 || moved > 30.0,
        "a 30% weight perturbation must move the markov section; shift was " +
            std::to_string(moved));
}

void criterion_skip_plumbing() {
  fs::path dir = scratch_root() / "skip";
  fs::create_directories(dir);

  MarkovChain generator = default_client_chain();
  fs::path clean = dir / "clean.trace";
  synth_trace_file(clean, generator, 5000, 42, "ab");

  CliResult built = run_cli("build-chain --trace '" + clean.string() +
                            "' --process ab --order 1 --out '" + (dir / "chain.txt").string() +
                            "'");
  check(built.exit_code == 0, "build-chain must exit 0: " + built.output);

  // a 1000-call anomalous prefix of calls the chain has never seen
  std::vector<std::string> calls;
  for (int i = 0; i < 500; ++i) {
    calls.push_back("mmap");
    calls.push_back("brk");
  }
  GeneratedSequence tail = generate(generator, 4000, 77);
  check(!tail.hit_dead_end, "tail generation must not dead-end");
  calls.insert(calls.end(), tail.sequence.calls.begin(), tail.sequence.calls.end());
  fs::path anomalous = dir / "anomalous.trace";
  write_trace_lines(anomalous, calls, "ab");

  std::string walk_args = "walk --chain '" + (dir / "chain.txt").string() + "' --trace '" +
                          anomalous.string() + "' --process ab --limit 4000";
  CliResult no_skip = run_cli(walk_args);
  check(no_skip.exit_code == 0, "walk must exit 0: " + no_skip.output);
  check(std::stoull(output_field(no_skip.output, "invalid")) >= 1,
        "without skip the anomalous prefix must trigger invalid transitions");

  CliResult with_skip = run_cli(walk_args + " --skip 1000");
  check(with_skip.exit_code == 0, "walk --skip must exit 0: " + with_skip.output);
  check(output_field(with_skip.output, "invalid") == "0",
        "skipping the prefix must remove every invalid transition: " + with_skip.output);
  check(output_field(with_skip.output, "sequence_length") == "4000",
        "limit must cap the walked length");

  // exit-code contract: 1 for usage errors, 2 for data errors
  check(run_cli("walk --no-such-flag").exit_code == 1, "usage errors must exit 1");
  check(run_cli("walk --chain '" + (dir / "missing.txt").string() + "' --trace '" +
                anomalous.string() + "' --process ab")
                .exit_code == 2,
        "data errors must exit 2");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "worked-example walk probabilities", 1.0, criterion_worked_walks},
      {2, "walk ordering claim (0.99*0.75^16 < 0.01)", 1.0, criterion_ordering_claim},
      {3, "round-trip chain recovery from 1e5 generated calls", 5.0, criterion_round_trip_recovery},
      {4, "log-space walk matches the exact rational oracle", 10.0, criterion_walk_vs_oracle},
      {5, "prune renormalizes 1000 random chains", 5.0, criterion_prune_renormalizes},
      {6, "self-walk sanity and single injected invalid", 1.0, criterion_self_walk},
      {7, "flow assembly matches closed-form expectations", 5.0, criterion_flow_exactness},
      {8, "confidence intervals and similarity verdicts", 1.0, criterion_statistics},
      {9, "deterministic end-to-end compare via the CLI", 60.0, criterion_end_to_end},
      {10, "skip/limit plumbing isolates anomalous prefixes", 5.0, criterion_skip_plumbing},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.fn();
    } catch (const std::exception& e) {
      error = e.what();
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty() && elapsed > c.budget_s)
      error = "runtime " + std::to_string(elapsed) + " s exceeds budget " +
              std::to_string(c.budget_s) + " s";
    if (error.empty()) {
      std::printf("PASS  %2d  %-55s %7.3f s (budget %g s)\n", c.id, c.name, elapsed, c.budget_s);
    } else {
      std::printf("FAIL  %2d  %-55s %7.3f s: %s\n", c.id, c.name, elapsed, error.c_str());
      ++failures;
    }
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
  }
  return failures == 0 ? 0 : 1;
}
