// tbcmp command-line tool: compare two testbed campaigns from their
// recorded artifacts, or run the individual pipeline stages standalone.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tbcmp/tbcmp.hpp"

namespace fs = std::filesystem;

namespace {

std::string format_log10(const std::optional<double>& v) {
  return v ? tbcmp::detail::format_double(*v) : std::string("undefined");
}

tbcmp::MarkovChain chain_for_traces(const std::vector<std::string>& traces,
                                    const std::string& process, int order, std::uint64_t skip,
                                    std::uint64_t limit, bool strict) {
  std::vector<tbcmp::MarkovChain> chains;
  for (const auto& path : traces) {
    tbcmp::TraceReader reader(path, strict);
    tbcmp::CallSequence seq = tbcmp::load_sequence(reader, process);
    if (seq.empty()) {
      std::cerr << "warning: no events for process '" << process << "' in " << path << "\n";
      continue;
    }
    if (skip > 0 || limit > 0)
      seq = tbcmp::slice_sequence(seq, skip, limit == 0 ? seq.size() : limit);
    chains.push_back(tbcmp::build_chain(seq, order));
  }
  return tbcmp::merge_chains(chains);
}

void add_build_chain(CLI::App& app) {
  auto* cmd = app.add_subcommand("build-chain",
                                 "Build a Markov chain from one or more trace files");
  auto traces = std::make_shared<std::vector<std::string>>();
  auto process = std::make_shared<std::string>();
  auto order = std::make_shared<int>(1);
  auto skip = std::make_shared<std::uint64_t>(0);
  auto limit = std::make_shared<std::uint64_t>(0);
  auto prune_threshold = std::make_shared<double>(0.0);
  auto out = std::make_shared<std::string>();
  auto dot = std::make_shared<std::string>();
  auto strict = std::make_shared<bool>(false);
  cmd->add_option("--trace", *traces, "trace file (repeatable; gzip ok)")->required();
  cmd->add_option("--process", *process, "process name to extract")->required();
  cmd->add_option("--order", *order, "chain order N")->check(CLI::PositiveNumber);
  cmd->add_option("--skip", *skip, "calls to skip at the front of each sequence");
  cmd->add_option("--limit", *limit, "cap each sequence length (0 = no cap)");
  cmd->add_option("--prune-threshold", *prune_threshold, "drop arcs below this weight");
  cmd->add_option("--out", *out, "write the chain in text form");
  cmd->add_option("--dot", *dot, "write a DOT rendering");
  cmd->add_flag("--strict", *strict, "malformed trace lines are fatal");
  cmd->callback([=] {
    tbcmp::MarkovChain chain =
        chain_for_traces(*traces, *process, *order, *skip, *limit, *strict);
    if (*prune_threshold > 0.0) chain = tbcmp::prune(chain, *prune_threshold);
    if (!out->empty()) tbcmp::save_chain(chain, *out);
    if (!dot->empty()) tbcmp::detail::write_file(*dot, tbcmp::to_dot(chain));
    if (out->empty() && dot->empty()) std::cout << tbcmp::serialize_chain(chain);
    std::cerr << "chain: order=" << chain.order() << " nodes=" << chain.node_count()
              << " arcs=" << chain.arc_count() << " transitions=" << chain.total_transitions()
              << "\n";
  });
}

void add_walk(CLI::App& app) {
  auto* cmd = app.add_subcommand("walk", "Replay a trace's call sequence over a chain");
  auto chain_path = std::make_shared<std::string>();
  auto trace = std::make_shared<std::string>();
  auto process = std::make_shared<std::string>();
  auto skip = std::make_shared<std::uint64_t>(0);
  auto limit = std::make_shared<std::uint64_t>(0);
  auto show_invalid = std::make_shared<bool>(false);
  cmd->add_option("--chain", *chain_path, "chain file from build-chain")->required();
  cmd->add_option("--trace", *trace, "trace file to walk")->required();
  cmd->add_option("--process", *process, "process name to extract")->required();
  cmd->add_option("--skip", *skip, "calls to skip before walking");
  cmd->add_option("--limit", *limit, "cap the walked length (0 = no cap)");
  cmd->add_flag("--show-invalid", *show_invalid, "list each invalid transition");
  cmd->callback([=] {
    tbcmp::MarkovChain chain = tbcmp::load_chain(*chain_path);
    tbcmp::TraceReader reader(*trace);
    tbcmp::CallSequence seq = tbcmp::load_sequence(reader, *process);
    if (*skip > 0 || *limit > 0)
      seq = tbcmp::slice_sequence(seq, *skip, *limit == 0 ? seq.size() : *limit);
    tbcmp::WalkResult w = tbcmp::walk(chain, seq);
    std::cout << "sequence_length=" << w.sequence_length << " transitions=" << w.transitions
              << " invalid=" << w.invalid_transitions.size()
              << " log10_prob=" << format_log10(w.log10_prob) << "\n";
    if (*show_invalid) {
      for (const auto& inv : w.invalid_transitions)
        std::cout << "invalid position=" << inv.position << " from=" << inv.from_label
                  << " to=" << inv.to_label << "\n";
    }
  });
}

void add_flows(CLI::App& app) {
  auto* cmd = app.add_subcommand("flows", "Reconstruct TCP flows from a pcap capture");
  auto pcap = std::make_shared<std::string>();
  auto server = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  auto strict = std::make_shared<bool>(false);
  cmd->add_option("--pcap", *pcap, "classic pcap file")->required();
  cmd->add_option("--server", *server, "server endpoint ip:port for orientation");
  cmd->add_option("--csv", *csv, "write the per-flow CSV here");
  cmd->add_flag("--strict", *strict, "truncated packets are fatal");
  cmd->callback([=] {
    tbcmp::PcapReader reader(*pcap, *strict);
    auto flows = tbcmp::assemble_flows(reader);
    if (!csv->empty())
      tbcmp::detail::write_file(*csv, tbcmp::flows_to_csv(flows));
    else
      std::cout << tbcmp::flows_to_csv(flows);
    std::cerr << "flows=" << flows.size() << " skipped_non_tcp=" << reader.skipped().non_tcp
              << " skipped_truncated=" << reader.skipped().truncated << "\n";
    if (!server->empty()) {
      auto stats = tbcmp::experiment_stats(flows, tbcmp::parse_endpoint(*server));
      std::cout << "total_packets=" << stats.total_packets
                << " total_payload_bytes=" << stats.total_payload_bytes
                << " total_retransmitted_bytes=" << stats.total_retransmitted_bytes
                << " server_to_client_bytes=" << stats.server_to_client_bytes << "\n";
    }
  });
}

void add_metrics(CLI::App& app) {
  auto* cmd = app.add_subcommand("metrics", "Parse benchmark output and delay samples");
  auto ab = std::make_shared<std::string>();
  auto delays = std::make_shared<std::string>();
  cmd->add_option("--ab", *ab, "ApacheBench output file");
  cmd->add_option("--delays", *delays, "one-way delay CSV (send_ts_ns,delay_ms)");
  cmd->callback([=] {
    if (ab->empty() && delays->empty())
      throw CLI::ValidationError("metrics", "need --ab and/or --delays");
    if (!ab->empty()) {
      tbcmp::AbResult r = tbcmp::parse_ab_output(tbcmp::detail::read_file(*ab));
      std::cout << "completed_requests=" << r.completed_requests
                << " duration_s=" << tbcmp::detail::format_double(r.duration_s)
                << " requests_per_sec=" << tbcmp::detail::format_double(r.requests_per_sec)
                << " total_transferred_bytes=" << r.total_transferred_bytes
                << " cross_check_ok=" << (r.cross_check_ok ? "true" : "false") << "\n";
    }
    if (!delays->empty()) {
      auto samples = tbcmp::parse_delay_csv(tbcmp::detail::read_file(*delays));
      std::cout << "delay_samples=" << samples.size()
                << " jitter_ms=" << tbcmp::detail::format_double(tbcmp::jitter(samples)) << "\n";
    }
  });
}

void add_compare(CLI::App& app) {
  auto* cmd = app.add_subcommand("compare",
                                 "Compare a candidate campaign against a baseline campaign");
  auto baseline = std::make_shared<std::string>();
  auto candidate = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("tbcmp-report");
  auto options = std::make_shared<tbcmp::CompareOptions>();
  auto process = std::make_shared<std::string>("client");
  auto formats = std::make_shared<std::string>("json,csv,dot");
  auto exclude = std::make_shared<std::string>();
  cmd->add_option("--baseline", *baseline, "baseline campaign manifest")->required();
  cmd->add_option("--candidate", *candidate, "candidate campaign manifest")->required();
  cmd->add_option("--out", *out, "output directory");
  cmd->add_option("--order", options->order, "Markov chain order N")->check(CLI::PositiveNumber);
  cmd->add_option("--prune-threshold", options->prune_threshold,
                  "drop chain arcs below this weight");
  cmd->add_option("--skip", options->skip, "calls to skip before walking");
  cmd->add_option("--limit", options->limit, "cap walked sequence length");
  cmd->add_option("--similarity-threshold", options->similarity_threshold,
                  "relative mean difference considered similar");
  cmd->add_option("--process", *process, "markov analysis side: client or server")
      ->check(CLI::IsMember({"client", "server"}));
  cmd->add_option("--exclude", *exclude, "comma-separated run ids to drop");
  cmd->add_option("--format", *formats, "comma-separated subset of json,csv,dot");
  cmd->callback([=] {
    options->process =
        (*process == "server") ? tbcmp::ProcessSide::Server : tbcmp::ProcessSide::Client;
    if (!exclude->empty())
      for (auto part : tbcmp::detail::split(*exclude, ','))
        options->exclude.emplace_back(tbcmp::detail::trim(part));
    bool json = false, csv = false, dot = false;
    for (auto part : tbcmp::detail::split(*formats, ',')) {
      auto f = tbcmp::detail::trim(part);
      if (f == "json")
        json = true;
      else if (f == "csv")
        csv = true;
      else if (f == "dot")
        dot = true;
      else
        throw CLI::ValidationError("--format", "unknown format '" + std::string(f) + "'");
    }
    auto base_mf = tbcmp::load_manifest(*baseline);
    auto cand_mf = tbcmp::load_manifest(*candidate);
    auto report = tbcmp::run_compare(base_mf, cand_mf, *options);
    auto written = tbcmp::emit(report, *out, json, csv, dot);
    for (const auto& p : written) std::cerr << "wrote " << p.string() << "\n";
    std::size_t similar = 0, total = 0;
    for (const auto& cell : report.cells)
      for (const auto& m : cell.metrics) {
        ++total;
        if (m.verdict.similar) ++similar;
      }
    std::cout << "cells=" << report.cells.size() << " metrics=" << total
              << " similar=" << similar << "\n";
  });
}

void add_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "Generate ground-truth synthetic inputs");
  cmd->require_subcommand(1);

  auto* trace = cmd->add_subcommand("trace", "Trace file from a chain walk");
  auto t_chain = std::make_shared<std::string>();
  auto t_length = std::make_shared<std::uint64_t>(1000);
  auto t_seed = std::make_shared<std::uint64_t>(1);
  auto t_process = std::make_shared<std::string>("ab");
  auto t_out = std::make_shared<std::string>();
  trace->add_option("--chain", *t_chain, "generator chain (default: built-in client chain)");
  trace->add_option("--length", *t_length, "sequence length");
  trace->add_option("--seed", *t_seed, "generator seed");
  trace->add_option("--process", *t_process, "process name to write");
  trace->add_option("--out", *t_out, "output trace file")->required();
  trace->callback([=] {
    tbcmp::MarkovChain chain =
        t_chain->empty() ? tbcmp::default_client_chain() : tbcmp::load_chain(*t_chain);
    auto r = tbcmp::synth_trace_file(*t_out, chain, *t_length, *t_seed, *t_process);
    std::cout << "calls=" << r.sequence.size() << " lines=" << r.lines
              << " read_calls=" << r.expected_reads.read_calls
              << " bytes_read=" << r.expected_reads.bytes_read
              << " dead_end=" << (r.hit_dead_end ? "true" : "false") << "\n";
  });

  auto* pcap = cmd->add_subcommand("pcap", "Capture file from a seeded flow schedule");
  auto p_flows = std::make_shared<std::uint64_t>(2);
  auto p_segments = std::make_shared<std::uint64_t>(6);
  auto p_duplicates = std::make_shared<std::uint64_t>(1);
  auto p_seed = std::make_shared<std::uint64_t>(1);
  auto p_out = std::make_shared<std::string>();
  pcap->add_option("--flows", *p_flows, "number of flows");
  pcap->add_option("--segments", *p_segments, "data segments per flow");
  pcap->add_option("--duplicates", *p_duplicates, "duplicated segments per capture");
  pcap->add_option("--seed", *p_seed, "schedule seed");
  pcap->add_option("--out", *p_out, "output pcap file")->required();
  pcap->callback([=] {
    tbcmp::Endpoint server{0x0a000002, 80};
    std::vector<tbcmp::FlowSpec> specs;
    std::uint64_t dups_left = *p_duplicates;
    for (std::uint64_t f = 0; f < *p_flows; ++f) {
      tbcmp::FlowSpec spec;
      spec.client = tbcmp::Endpoint{0x0a000001, static_cast<std::uint16_t>(41000 + f)};
      spec.server = server;
      for (std::uint64_t s = 0; s < *p_segments; ++s) {
        bool dup = dups_left > 0 && s + 1 == *p_segments;
        if (dup) --dups_left;
        spec.segments.push_back({s % 3 == 0 ? tbcmp::SegmentDirection::ClientToServer
                                            : tbcmp::SegmentDirection::ServerToClient,
                                 500, dup});
      }
      specs.push_back(std::move(spec));
    }
    tbcmp::synth_pcap_file(*p_out, specs, *p_seed);
    auto expect = tbcmp::expected_capture_stats(specs, server);
    std::cout << "flows=" << expect.flow_count << " packets=" << expect.total_packets
              << " payload_bytes=" << expect.total_payload_bytes
              << " retransmitted_bytes=" << expect.total_retransmitted_bytes
              << " server_to_client_bytes=" << expect.server_to_client_bytes << "\n";
  });

  auto* ab = cmd->add_subcommand("ab", "Benchmark output from known parameters");
  auto a_requests = std::make_shared<std::uint64_t>(100000);
  auto a_duration = std::make_shared<double>(90.0);
  auto a_bytes = std::make_shared<std::uint64_t>(520);
  auto a_out = std::make_shared<std::string>();
  ab->add_option("--requests", *a_requests, "completed requests");
  ab->add_option("--duration", *a_duration, "test duration in seconds");
  ab->add_option("--bytes-per-request", *a_bytes, "transferred bytes per request");
  ab->add_option("--out", *a_out, "output file")->required();
  ab->callback([=] {
    tbcmp::detail::write_file(
        *a_out,
        tbcmp::format_ab_output(tbcmp::make_ab_result(*a_requests, *a_duration, *a_bytes, 10)));
  });

  auto* delays = cmd->add_subcommand("delays", "One-way delay CSV from known parameters");
  auto d_count = std::make_shared<std::uint64_t>(200);
  auto d_base = std::make_shared<double>(1.0);
  auto d_spread = std::make_shared<double>(0.5);
  auto d_seed = std::make_shared<std::uint64_t>(1);
  auto d_out = std::make_shared<std::string>();
  delays->add_option("--count", *d_count, "sample count");
  delays->add_option("--base", *d_base, "base delay in ms");
  delays->add_option("--spread", *d_spread, "uniform spread in ms");
  delays->add_option("--seed", *d_seed, "sample seed");
  delays->add_option("--out", *d_out, "output CSV")->required();
  delays->callback([=] {
    tbcmp::detail::write_file(
        *d_out, tbcmp::format_delay_csv(tbcmp::synth_delays(*d_count, *d_base, *d_spread, *d_seed)));
  });

  auto* campaign = cmd->add_subcommand("campaign", "Full campaign directory with manifest");
  auto c_out = std::make_shared<std::string>();
  auto c_id = std::make_shared<std::string>("synthetic");
  auto c_runs = std::make_shared<std::uint64_t>(10);
  auto c_seed = std::make_shared<std::uint64_t>(1);
  auto c_chain = std::make_shared<std::string>();
  auto c_perturb = std::make_shared<double>(0.0);
  auto c_length = std::make_shared<std::uint64_t>(6000);
  auto c_payload = std::make_shared<std::string>("500B");
  auto c_link = std::make_shared<std::string>("1Gbps");
  campaign->add_option("--out", *c_out, "campaign directory")->required();
  campaign->add_option("--id", *c_id, "campaign id");
  campaign->add_option("--runs", *c_runs, "number of runs");
  campaign->add_option("--seed", *c_seed, "campaign seed");
  campaign->add_option("--chain", *c_chain, "client generator chain file (default built-in)");
  campaign->add_option("--perturb", *c_perturb, "perturb generator weights by this fraction");
  campaign->add_option("--seq-length", *c_length, "calls per synthesized trace");
  campaign->add_option("--payload", *c_payload, "payload label");
  campaign->add_option("--link", *c_link, "link label");
  campaign->callback([=] {
    tbcmp::CampaignSynthSpec spec;
    spec.campaign_id = *c_id;
    spec.runs = *c_runs;
    spec.seed = *c_seed;
    if (!c_chain->empty()) spec.client_chain = tbcmp::load_chain(*c_chain);
    spec.weight_perturbation = *c_perturb;
    spec.sequence_length = *c_length;
    spec.payload_label = *c_payload;
    spec.link_label = *c_link;
    auto manifest = tbcmp::synth_campaign(spec, *c_out);
    std::cout << "manifest=" << manifest.string() << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare physical and virtual testbed campaigns from recorded artifacts"};
  app.set_version_flag("--version", std::string(tbcmp::kToolVersion));
  app.require_subcommand(1);
  add_build_chain(app);
  add_walk(app);
  add_flows(app);
  add_metrics(app);
  add_compare(app);
  add_synth(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const tbcmp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
