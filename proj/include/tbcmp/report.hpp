#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbcmp/detail/io.hpp"
#include "tbcmp/detail/text.hpp"
#include "tbcmp/errors.hpp"
#include "tbcmp/manifest.hpp"
#include "tbcmp/markov.hpp"
#include "tbcmp/metrics.hpp"
#include "tbcmp/pcap.hpp"
#include "tbcmp/stats.hpp"
#include "tbcmp/trace.hpp"
#include "tbcmp/version.hpp"

// Orchestration: run the full pipeline over a baseline and a candidate
// campaign and render the comparison as JSON, CSV tables and DOT graphs.
// Identical inputs and options produce byte-identical outputs.

namespace tbcmp {

enum class ProcessSide { Client, Server };

inline std::string_view process_side_name(ProcessSide side) {
  return side == ProcessSide::Client ? "client" : "server";
}

struct CompareOptions {
  int order = 1;
  double prune_threshold = 0.001;
  std::uint64_t skip = 1'000'000;
  std::uint64_t limit = 2'000'000;
  double similarity_threshold = 0.10;
  ProcessSide process = ProcessSide::Client;
  std::vector<std::string> exclude;  // run ids dropped before any statistics
};

struct MetricRow {
  std::string name;
  MetricLevel level = MetricLevel::Application;
  ConfidenceInterval baseline, candidate;
  std::size_t baseline_n = 0, candidate_n = 0;
  Verdict verdict;
};

struct WalkClassStats {
  std::uint64_t walks = 0;
  std::uint64_t valid_walks = 0;
  std::uint64_t invalid_transitions = 0;
  std::optional<double> mean_log10;  // over valid walks only
};

struct MarkovVariantStats {
  std::uint64_t skip = 0;
  std::uint64_t effective_length = 0;  // common walk length; 0 when nothing walkable
  std::vector<std::vector<std::uint64_t>> invalid_matrix_baseline;   // [chain][sequence]
  std::vector<std::vector<std::uint64_t>> invalid_matrix_candidate;  // [chain][sequence]
  WalkClassStats baseline, candidate;
  std::optional<double> mean_relative_log10;  // candidate mean - baseline mean
  std::vector<std::string> skipped_sequences;  // too short for this skip
};

struct ChainSummary {
  std::size_t nodes = 0;
  std::size_t arcs = 0;
};

struct MarkovCellReport {
  int order = 1;
  double prune_threshold = 0.001;
  std::uint64_t skip = 0, limit = 0;
  std::size_t chains = 0;  // baseline chains walked against
  ChainSummary baseline_chain, candidate_chain;
  std::string baseline_dot, candidate_dot;  // merged + pruned chains
  MarkovVariantStats no_skip, with_skip;
  std::vector<std::string> notes;
};

struct CellReport {
  std::string payload_label, link_label;
  std::vector<MetricRow> metrics;
  std::optional<MarkovCellReport> markov;
  std::string note;
};

struct RunStatus {
  std::string campaign_id;
  std::string run_id;
  bool included = false;
  std::string reason;  // exclusion reason, or a warning on an included run
};

struct ComparisonReport {
  std::string tool_name, tool_version;
  CompareOptions options;
  std::string baseline_id, baseline_digest;
  std::string candidate_id, candidate_digest;
  std::vector<RunStatus> runs;  // baseline runs first, then candidate, manifest order
  std::vector<CellReport> cells;
  std::vector<std::string> unmatched_cells;  // "campaign: payload/link" on one side only
};

namespace detail_report {

struct RunData {
  const RunSpec* spec = nullptr;
  AbResult ab;
  ReadSummary reads;
  ExperimentFlowStats flow_stats;
  double jitter_ms = 0.0;
  CallSequence markov_sequence;
  std::string warning;
};

inline RunData load_run(const RunSpec& spec, ProcessSide side) {
  RunData data;
  data.spec = &spec;
  data.ab = parse_ab_output(detail::read_file(spec.ab_output));
  data.ab.payload_label = spec.payload_label;
  if (!data.ab.cross_check_ok) data.warning = "ab rate cross-check failed";

  TraceReader client_reader(spec.client_trace.string());
  TraceScan client_scan = scan_trace(client_reader, spec.client_process);
  data.reads = client_scan.reads;
  if (side == ProcessSide::Client) {
    data.markov_sequence = std::move(client_scan.sequence);
  } else {
    TraceReader server_reader(spec.server_trace.string());
    data.markov_sequence = load_sequence(server_reader, spec.server_process);
  }
  data.markov_sequence.source_id = spec.run_id;

  PcapReader pcap_reader(spec.pcap.string());
  auto flows = assemble_flows(pcap_reader);
  data.flow_stats = experiment_stats(flows, parse_endpoint(spec.server_endpoint));

  data.jitter_ms = jitter(parse_delay_csv(detail::read_file(spec.delay_csv)));
  return data;
}

struct Campaign {
  const CampaignManifest* manifest = nullptr;
  std::vector<RunData> runs;
};

inline Campaign load_campaign(const CampaignManifest& mf, const CompareOptions& options,
                              std::vector<RunStatus>& statuses) {
  Campaign campaign;
  campaign.manifest = &mf;
  const std::set<std::string> excluded(options.exclude.begin(), options.exclude.end());
  for (const auto& spec : mf.runs) {
    RunStatus status{mf.campaign_id, spec.run_id, false, ""};
    if (excluded.count(spec.run_id)) {
      status.reason = "excluded by option";
      statuses.push_back(std::move(status));
      continue;
    }
    try {
      RunData data = load_run(spec, options.process);
      status.included = true;
      status.reason = data.warning;
      campaign.runs.push_back(std::move(data));
    } catch (const Error& e) {
      status.reason = e.what();
    }
    statuses.push_back(std::move(status));
  }
  return campaign;
}

using CellKey = std::pair<std::string, std::string>;  // payload, link

inline std::map<CellKey, std::vector<const RunData*>> group_cells(const Campaign& campaign) {
  std::map<CellKey, std::vector<const RunData*>> cells;
  for (const auto& run : campaign.runs)
    cells[{run.spec->payload_label, run.spec->link_label}].push_back(&run);
  return cells;
}

inline MetricRow metric_row(const std::string& name, MetricLevel level,
                            const std::vector<double>& baseline_values,
                            const std::vector<double>& candidate_values, double threshold) {
  MetricRow row;
  row.name = name;
  row.level = level;
  row.baseline_n = baseline_values.size();
  row.candidate_n = candidate_values.size();
  row.baseline = confidence_interval(SampleSet{name, baseline_values});
  row.candidate = confidence_interval(SampleSet{name, candidate_values});
  row.verdict = similarity_from_cis(row.baseline, row.candidate, threshold);
  return row;
}

inline MarkovVariantStats walk_variant(const std::vector<MarkovChain>& chains,
                                       const std::vector<const RunData*>& baseline_runs,
                                       const std::vector<const RunData*>& candidate_runs,
                                       std::uint64_t skip, std::uint64_t limit, int order) {
  MarkovVariantStats stats;
  stats.skip = skip;

  struct Entry {
    const CallSequence* seq;
    CallSequence sliced;
  };
  auto slice_class = [&](const std::vector<const RunData*>& runs, const char* class_name) {
    std::vector<CallSequence> out;
    for (const auto* run : runs) {
      try {
        out.push_back(slice_sequence(run->markov_sequence, skip, limit));
      } catch (const SkipExceedsLength&) {
        stats.skipped_sequences.push_back(std::string(class_name) + "/" + run->spec->run_id);
      }
    }
    return out;
  };
  std::vector<CallSequence> base_seqs = slice_class(baseline_runs, "baseline");
  std::vector<CallSequence> cand_seqs = slice_class(candidate_runs, "candidate");

  std::size_t effective = SIZE_MAX;
  for (const auto& s : base_seqs) effective = std::min(effective, s.size());
  for (const auto& s : cand_seqs) effective = std::min(effective, s.size());
  if (base_seqs.empty() || cand_seqs.empty() ||
      effective < static_cast<std::size_t>(order) + 1) {
    stats.effective_length = 0;
    return stats;
  }
  stats.effective_length = effective;
  for (auto& s : base_seqs)
    if (s.size() > effective) s = slice_sequence(s, 0, effective);
  for (auto& s : cand_seqs)
    if (s.size() > effective) s = slice_sequence(s, 0, effective);

  auto walk_class = [&](const std::vector<CallSequence>& seqs, WalkClassStats& cls,
                        std::vector<std::vector<std::uint64_t>>& matrix) {
    matrix.assign(chains.size(), std::vector<std::uint64_t>(seqs.size(), 0));
    double log_sum = 0.0;
    for (std::size_t i = 0; i < chains.size(); ++i) {
      for (std::size_t j = 0; j < seqs.size(); ++j) {
        WalkResult w = walk(chains[i], seqs[j]);
        matrix[i][j] = w.invalid_transitions.size();
        cls.invalid_transitions += w.invalid_transitions.size();
        ++cls.walks;
        if (w.valid()) {
          ++cls.valid_walks;
          log_sum += *w.log10_prob;
        }
      }
    }
    if (cls.valid_walks > 0) cls.mean_log10 = log_sum / static_cast<double>(cls.valid_walks);
  };
  walk_class(base_seqs, stats.baseline, stats.invalid_matrix_baseline);
  walk_class(cand_seqs, stats.candidate, stats.invalid_matrix_candidate);
  if (stats.baseline.mean_log10 && stats.candidate.mean_log10)
    stats.mean_relative_log10 = *stats.candidate.mean_log10 - *stats.baseline.mean_log10;
  return stats;
}

inline std::optional<MarkovCellReport> markov_cell(const std::vector<const RunData*>& baseline,
                                                   const std::vector<const RunData*>& candidate,
                                                   const CompareOptions& options) {
  MarkovCellReport cell;
  cell.order = options.order;
  cell.prune_threshold = options.prune_threshold;
  cell.skip = options.skip;
  cell.limit = options.limit;

  auto build_class = [&](const std::vector<const RunData*>& runs, const char* class_name) {
    std::vector<MarkovChain> chains;
    for (const auto* run : runs) {
      try {
        chains.push_back(build_chain(run->markov_sequence, options.order));
      } catch (const SequenceTooShort& e) {
        cell.notes.push_back(std::string(class_name) + "/" + run->spec->run_id +
                             ": " + e.what());
      }
    }
    return chains;
  };
  std::vector<MarkovChain> baseline_chains = build_class(baseline, "baseline");
  std::vector<MarkovChain> candidate_chains = build_class(candidate, "candidate");
  if (baseline_chains.empty() || candidate_chains.empty()) {
    cell.notes.push_back("no chains could be built; markov comparison skipped");
    return cell;
  }
  cell.chains = baseline_chains.size();

  MarkovChain baseline_merged = prune(merge_chains(baseline_chains), options.prune_threshold);
  MarkovChain candidate_merged = prune(merge_chains(candidate_chains), options.prune_threshold);
  cell.baseline_chain = ChainSummary{baseline_merged.node_count(), baseline_merged.arc_count()};
  cell.candidate_chain =
      ChainSummary{candidate_merged.node_count(), candidate_merged.arc_count()};
  cell.baseline_dot = to_dot(baseline_merged);
  cell.candidate_dot = to_dot(candidate_merged);

  cell.no_skip = walk_variant(baseline_chains, baseline, candidate, 0, options.limit,
                              options.order);
  cell.with_skip = walk_variant(baseline_chains, baseline, candidate, options.skip, options.limit,
                                options.order);
  return cell;
}

}  // namespace detail_report

inline ComparisonReport run_compare(const CampaignManifest& baseline,
                                    const CampaignManifest& candidate,
                                    const CompareOptions& options = {}) {
  using namespace detail_report;
  ComparisonReport report;
  report.tool_name = kToolName;
  report.tool_version = kToolVersion;
  report.options = options;
  report.baseline_id = baseline.campaign_id;
  report.baseline_digest = baseline.digest;
  report.candidate_id = candidate.campaign_id;
  report.candidate_digest = candidate.digest;

  Campaign base = load_campaign(baseline, options, report.runs);
  Campaign cand = load_campaign(candidate, options, report.runs);

  auto base_cells = group_cells(base);
  auto cand_cells = group_cells(cand);

  for (const auto& [key, base_runs] : base_cells) {
    auto it = cand_cells.find(key);
    if (it == cand_cells.end()) {
      report.unmatched_cells.push_back(baseline.campaign_id + ": " + key.first + "/" + key.second);
      continue;
    }
    const auto& cand_runs = it->second;
    CellReport cell;
    cell.payload_label = key.first;
    cell.link_label = key.second;
    if (base_runs.size() < 2 || cand_runs.size() < 2) {
      cell.note = "insufficient runs for confidence intervals (baseline " +
                  std::to_string(base_runs.size()) + ", candidate " +
                  std::to_string(cand_runs.size()) + ")";
      report.cells.push_back(std::move(cell));
      continue;
    }

    auto values = [](const std::vector<const RunData*>& runs, auto&& fn) {
      std::vector<double> out;
      out.reserve(runs.size());
      for (const auto* r : runs) out.push_back(fn(*r));
      return out;
    };
    struct MetricDef {
      const char* name;
      MetricLevel level;
      double (*fn)(const RunData&);
    };
    const MetricDef defs[] = {
        {"requests_per_sec", MetricLevel::Application,
         [](const RunData& r) { return r.ab.requests_per_sec; }},
        {"reads_per_request", MetricLevel::Os,
         [](const RunData& r) {
           return static_cast<double>(r.reads.read_calls) /
                  static_cast<double>(r.ab.completed_requests);
         }},
        {"bytes_per_request", MetricLevel::Network,
         [](const RunData& r) {
           return static_cast<double>(r.flow_stats.server_to_client_bytes) /
                  static_cast<double>(r.ab.completed_requests);
         }},
        {"packets_per_request", MetricLevel::Network,
         [](const RunData& r) {
           return static_cast<double>(r.flow_stats.total_packets) /
                  static_cast<double>(r.ab.completed_requests);
         }},
        {"jitter_ms", MetricLevel::Network, [](const RunData& r) { return r.jitter_ms; }},
    };
    for (const auto& def : defs) {
      cell.metrics.push_back(metric_row(def.name, def.level, values(base_runs, def.fn),
                                        values(cand_runs, def.fn),
                                        options.similarity_threshold));
    }
    cell.markov = markov_cell(base_runs, cand_runs, options);
    report.cells.push_back(std::move(cell));
  }
  for (const auto& [key, runs] : cand_cells) {
    (void)runs;
    if (!base_cells.count(key))
      report.unmatched_cells.push_back(candidate.campaign_id + ": " + key.first + "/" +
                                       key.second);
  }
  return report;
}

// --- rendering ---------------------------------------------------------------

namespace detail_report {

using ordered_json = nlohmann::ordered_json;

inline ordered_json ci_json(const ConfidenceInterval& ci, std::size_t n) {
  return ordered_json{{"mean", ci.mean}, {"half_width", ci.half_width}, {"n", n}};
}

inline ordered_json verdict_json(const Verdict& v) {
  return ordered_json{{"relative_diff", v.relative_diff},
                      {"similar", v.similar},
                      {"ci_overlap", v.ci_overlap},
                      {"threshold", v.threshold}};
}

inline ordered_json class_stats_json(const WalkClassStats& s) {
  ordered_json j{{"walks", s.walks},
                 {"valid_walks", s.valid_walks},
                 {"invalid_transitions", s.invalid_transitions}};
  j["mean_log10"] = s.mean_log10 ? ordered_json(*s.mean_log10) : ordered_json(nullptr);
  return j;
}

inline ordered_json variant_json(const MarkovVariantStats& v) {
  ordered_json j;
  j["skip"] = v.skip;
  j["effective_length"] = v.effective_length;
  j["baseline"] = class_stats_json(v.baseline);
  j["candidate"] = class_stats_json(v.candidate);
  j["mean_relative_log10"] =
      v.mean_relative_log10 ? ordered_json(*v.mean_relative_log10) : ordered_json(nullptr);
  j["invalid_matrix_baseline"] = v.invalid_matrix_baseline;
  j["invalid_matrix_candidate"] = v.invalid_matrix_candidate;
  j["skipped_sequences"] = v.skipped_sequences;
  return j;
}

}  // namespace detail_report

inline nlohmann::ordered_json report_to_json(const ComparisonReport& report) {
  using namespace detail_report;
  ordered_json j;
  j["tool"] = ordered_json{{"name", report.tool_name}, {"version", report.tool_version}};
  j["options"] = ordered_json{{"order", report.options.order},
                              {"prune_threshold", report.options.prune_threshold},
                              {"skip", report.options.skip},
                              {"limit", report.options.limit},
                              {"similarity_threshold", report.options.similarity_threshold},
                              {"process", std::string(process_side_name(report.options.process))},
                              {"exclude", report.options.exclude}};
  auto campaign_json = [&](const std::string& id, const std::string& digest) {
    std::size_t included = 0, excluded = 0;
    for (const auto& r : report.runs) {
      if (r.campaign_id != id) continue;
      (r.included ? included : excluded) += 1;
    }
    return ordered_json{{"campaign_id", id},
                        {"manifest_digest", digest},
                        {"runs_included", included},
                        {"runs_excluded", excluded}};
  };
  j["baseline"] = campaign_json(report.baseline_id, report.baseline_digest);
  j["candidate"] = campaign_json(report.candidate_id, report.candidate_digest);

  j["runs"] = ordered_json::array();
  for (const auto& r : report.runs)
    j["runs"].push_back(ordered_json{{"campaign", r.campaign_id},
                                     {"run_id", r.run_id},
                                     {"included", r.included},
                                     {"reason", r.reason}});

  j["cells"] = ordered_json::array();
  for (const auto& cell : report.cells) {
    ordered_json cj;
    cj["payload"] = cell.payload_label;
    cj["link"] = cell.link_label;
    cj["note"] = cell.note;
    cj["metrics"] = ordered_json::array();
    for (const auto& m : cell.metrics) {
      cj["metrics"].push_back(ordered_json{{"name", m.name},
                                           {"level", std::string(metric_level_name(m.level))},
                                           {"baseline", ci_json(m.baseline, m.baseline_n)},
                                           {"candidate", ci_json(m.candidate, m.candidate_n)},
                                           {"verdict", verdict_json(m.verdict)}});
    }
    if (cell.markov) {
      const auto& mk = *cell.markov;
      ordered_json mj;
      mj["order"] = mk.order;
      mj["prune_threshold"] = mk.prune_threshold;
      mj["skip"] = mk.skip;
      mj["limit"] = mk.limit;
      mj["chains"] = mk.chains;
      mj["baseline_chain"] =
          ordered_json{{"nodes", mk.baseline_chain.nodes}, {"arcs", mk.baseline_chain.arcs}};
      mj["candidate_chain"] =
          ordered_json{{"nodes", mk.candidate_chain.nodes}, {"arcs", mk.candidate_chain.arcs}};
      mj["no_skip"] = variant_json(mk.no_skip);
      mj["skip_prefix"] = variant_json(mk.with_skip);
      mj["notes"] = mk.notes;
      cj["markov"] = mj;
    } else {
      cj["markov"] = nullptr;
    }
    j["cells"].push_back(cj);
  }
  j["unmatched_cells"] = report.unmatched_cells;
  return j;
}

inline std::vector<std::filesystem::path> emit(const ComparisonReport& report,
                                               const std::filesystem::path& out_dir,
                                               bool json = true, bool csv = true,
                                               bool dot = true) {
  namespace fs = std::filesystem;
  using detail::format_double;
  std::vector<fs::path> written;
  fs::create_directories(out_dir);
  auto emit_file = [&](const fs::path& name, const std::string& data) {
    fs::path p = out_dir / name;
    detail::write_file(p, data);
    written.push_back(p);
  };

  if (json) emit_file("report.json", report_to_json(report).dump(2) + "\n");

  if (csv) {
    auto metric_csv = [&](const std::string& metric_name) {
      std::ostringstream os;
      os << "payload,link,baseline_mean,baseline_half_width,baseline_n,candidate_mean,"
            "candidate_half_width,candidate_n,relative_diff,similar,ci_overlap\n";
      for (const auto& cell : report.cells) {
        for (const auto& m : cell.metrics) {
          if (m.name != metric_name) continue;
          os << cell.payload_label << ',' << cell.link_label << ',' << format_double(m.baseline.mean)
             << ',' << format_double(m.baseline.half_width) << ',' << m.baseline_n << ','
             << format_double(m.candidate.mean) << ',' << format_double(m.candidate.half_width)
             << ',' << m.candidate_n << ',' << format_double(m.verdict.relative_diff) << ','
             << (m.verdict.similar ? "true" : "false") << ','
             << (m.verdict.ci_overlap ? "true" : "false") << "\n";
        }
      }
      return os.str();
    };
    for (const char* name : {"requests_per_sec", "reads_per_request", "bytes_per_request",
                             "packets_per_request", "jitter_ms"})
      emit_file(std::string(name) + ".csv", metric_csv(name));

    std::ostringstream invalid_csv;
    invalid_csv << "payload,link,sequence_class,no_skip_invalid,no_skip_walks,skip_invalid,"
                   "skip_walks\n";
    std::ostringstream rel_csv;
    rel_csv << "payload,link,variant,baseline_mean_log10,candidate_mean_log10,"
               "mean_relative_log10,baseline_valid_walks,candidate_valid_walks\n";
    auto opt_str = [&](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string("");
    };
    for (const auto& cell : report.cells) {
      if (!cell.markov) continue;
      const auto& mk = *cell.markov;
      invalid_csv << cell.payload_label << ',' << cell.link_label << ",baseline,"
                  << mk.no_skip.baseline.invalid_transitions << ',' << mk.no_skip.baseline.walks
                  << ',' << mk.with_skip.baseline.invalid_transitions << ','
                  << mk.with_skip.baseline.walks << "\n";
      invalid_csv << cell.payload_label << ',' << cell.link_label << ",candidate,"
                  << mk.no_skip.candidate.invalid_transitions << ',' << mk.no_skip.candidate.walks
                  << ',' << mk.with_skip.candidate.invalid_transitions << ','
                  << mk.with_skip.candidate.walks << "\n";
      for (const auto* variant : {&mk.no_skip, &mk.with_skip}) {
        rel_csv << cell.payload_label << ',' << cell.link_label << ','
                << (variant == &mk.no_skip ? "no_skip" : "skip_prefix") << ','
                << opt_str(variant->baseline.mean_log10) << ','
                << opt_str(variant->candidate.mean_log10) << ','
                << opt_str(variant->mean_relative_log10) << ',' << variant->baseline.valid_walks
                << ',' << variant->candidate.valid_walks << "\n";
      }
    }
    emit_file("invalid_transitions.csv", invalid_csv.str());
    emit_file("relative_log10.csv", rel_csv.str());

    // reasons can be arbitrary error text; quote per RFC 4180
    auto csv_quote = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string out = "\"";
      for (char c : s) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
      return out;
    };
    std::ostringstream runs_csv;
    runs_csv << "campaign,run_id,included,reason\n";
    for (const auto& r : report.runs)
      runs_csv << r.campaign_id << ',' << r.run_id << ',' << (r.included ? "true" : "false") << ','
               << csv_quote(r.reason) << "\n";
    emit_file("runs.csv", runs_csv.str());
  }

  if (dot) {
    auto slug = [](const std::string& s) {
      std::string out;
      for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '-';
      return out;
    };
    for (const auto& cell : report.cells) {
      if (!cell.markov) continue;
      std::string suffix = slug(cell.payload_label) + "_" + slug(cell.link_label) + ".dot";
      emit_file("chain_baseline_" + suffix, cell.markov->baseline_dot);
      emit_file("chain_candidate_" + suffix, cell.markov->candidate_dot);
    }
  }
  return written;
}

}  // namespace tbcmp
