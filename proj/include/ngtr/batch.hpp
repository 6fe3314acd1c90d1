#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <semaphore>
#include <set>
#include <string>
#include <vector>

#include "ngtr/pipeline.hpp"
#include "ngtr/store.hpp"

namespace ngtr {

struct CorpusSample {
  std::string id;
  std::filesystem::path image_path;
  std::string gold_markup;  // empty when unlabeled
};

struct BatchOptions {
  int workers = 4;
  std::filesystem::path store_dir;  // neighbor image paths resolve against this
};

struct BatchResult {
  std::vector<RunReport> reports;   // in corpus order
  size_t n_ok = 0;
  size_t n_scored = 0;
  double mean_teds = 0.0;
  double mean_teds_struct = 0.0;
  std::map<ToolId, double> tool_usage_rates;
  size_t samples_with_tools = 0;
};

/// Tool usage rate per Table-style accounting: of the samples where at
/// least one tool was actually applied, the fraction that applied each
/// tool.
inline void summarize_batch(BatchResult& result) {
  double teds_sum = 0.0, struct_sum = 0.0;
  std::map<ToolId, size_t> tool_counts;
  for (const auto& report : result.reports) {
    if (report.ok) ++result.n_ok;
    if (report.ok && report.teds >= 0) {
      ++result.n_scored;
      teds_sum += report.teds;
      struct_sum += report.teds_struct;
    }
    if (!report.applied_tools.empty()) {
      ++result.samples_with_tools;
      std::set<ToolId> uniq(report.applied_tools.begin(), report.applied_tools.end());
      for (ToolId t : uniq) ++tool_counts[t];
    }
  }
  if (result.n_scored > 0) {
    result.mean_teds = teds_sum / static_cast<double>(result.n_scored);
    result.mean_teds_struct = struct_sum / static_cast<double>(result.n_scored);
  }
  for (ToolId t : all_tools())
    result.tool_usage_rates[t] =
        result.samples_with_tools == 0
            ? 0.0
            : static_cast<double>(tool_counts[t]) / static_cast<double>(result.samples_with_tools);
}

/// Runs the pipeline over a corpus with a bounded worker pool. Samples are
/// independent; reports come back in corpus order so output files are
/// reproducible. A failing sample yields an error report, never an abort.
inline BatchResult run_batch(const std::vector<CorpusSample>& samples, const NeighborStore& store,
                             Gateway& gateway, const PromptRegistry& prompts,
                             const std::vector<ToolDescriptor>& tools, const PipelineConfig& cfg,
                             const BatchOptions& options) {
  auto workers = std::max(1, options.workers);
  auto gate = std::make_shared<std::counting_semaphore<>>(workers);
  auto load_neighbor = [dir = options.store_dir](const NeighborRecord& rec) {
    return load_image(resolve_record_image(rec, dir).string(), rec.id);
  };

  std::vector<std::future<RunReport>> futures;
  futures.reserve(samples.size());
  for (const auto& sample : samples) {
    futures.push_back(std::async(std::launch::async, [&, sample] {
      gate->acquire();
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{*gate};
      TableImage img;
      try {
        img = load_image(sample.image_path.string(), sample.id);
      } catch (const Error& e) {
        RunReport report;
        report.id = sample.id;
        report.error_stage = "load";
        report.error_message = e.what();
        return report;
      }
      return run_sample(img, sample.gold_markup, store, load_neighbor, gateway, prompts, tools,
                        cfg);
    }));
  }

  BatchResult result;
  result.reports.reserve(samples.size());
  for (auto& f : futures) result.reports.push_back(f.get());
  summarize_batch(result);
  return result;
}

inline nlohmann::json batch_summary_json(const BatchResult& result, const NeighborStore& store) {
  nlohmann::json usage;
  for (const auto& [tool, rate] : result.tool_usage_rates) usage[to_string(tool)] = rate;
  return nlohmann::json{{"n_samples", result.reports.size()},
                        {"n_ok", result.n_ok},
                        {"n_failed", result.reports.size() - result.n_ok},
                        {"n_scored", result.n_scored},
                        {"mean_teds", result.mean_teds},
                        {"mean_teds_struct", result.mean_teds_struct},
                        {"samples_with_tools", result.samples_with_tools},
                        {"tool_usage_rates", usage},
                        {"store_size", store.size()},
                        {"wrapper_policy", "flatten"}};
}

/// Writes reports.jsonl (deterministic), timing.jsonl (sidecar with
/// per-sample wall time) and summary.json into the output directory.
inline void write_batch_outputs(const BatchResult& result, const NeighborStore& store,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream reports(out_dir / "reports.jsonl");
  std::ofstream timing(out_dir / "timing.jsonl");
  for (const auto& report : result.reports) {
    reports << report.to_json().dump() << "\n";
    timing << nlohmann::json{{"id", report.id}, {"timing_ms", report.timing_ms}}.dump() << "\n";
  }
  std::ofstream summary(out_dir / "summary.json");
  summary << batch_summary_json(result, store).dump(2) << "\n";
}

}  // namespace ngtr
