#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <regex>
#include <semaphore>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngtr/digest.hpp"
#include "ngtr/gateway.hpp"
#include "ngtr/prompts.hpp"
#include "ngtr/table.hpp"
#include "ngtr/teds.hpp"

namespace ngtr {

enum class TaskKind { Vtsd, Irdr, Icdr, Mcd, Ccr, Icr };

inline const std::set<TaskKind>& all_task_kinds() {
  static const std::set<TaskKind> kinds = {TaskKind::Vtsd, TaskKind::Irdr, TaskKind::Icdr,
                                           TaskKind::Mcd,  TaskKind::Ccr,  TaskKind::Icr};
  return kinds;
}

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Vtsd: return "VTSD";
    case TaskKind::Irdr: return "IRDR";
    case TaskKind::Icdr: return "ICDR";
    case TaskKind::Mcd: return "MCD";
    case TaskKind::Ccr: return "CCR";
    case TaskKind::Icr: return "ICR";
  }
  return "?";
}

inline std::optional<TaskKind> task_kind_from_string(std::string_view name) {
  for (TaskKind k : all_task_kinds()) {
    std::string s = to_string(k);
    if (s.size() == name.size() &&
        std::equal(s.begin(), s.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) ==
                 std::tolower(static_cast<unsigned char>(b));
        }))
      return k;
  }
  return std::nullopt;
}

/// One hierarchical recognition task with its query parameters and the
/// gold answer derived from the sample's logical table.
struct HierTask {
  TaskKind kind = TaskKind::Vtsd;
  std::string sample_id;
  int row_index = -1;                       // IRDR
  int col_index = -1;                       // ICDR
  std::string query_content;                // CCR
  std::pair<int, int> query_location{-1, -1};  // ICR
  std::pair<int, int> gold_size{-1, -1};       // VTSD
  std::vector<std::string> gold_list;          // IRDR/ICDR/MCD
  std::pair<int, int> gold_location{-1, -1};   // CCR
  std::string gold_content;                    // ICR
};

namespace detail {

inline std::pair<int, int> grid_size(const LogicalTable& t) {
  int max_row = -1, max_col = -1;
  for (const auto& c : t.cells) {
    max_row = std::max(max_row, c.end_row);
    max_col = std::max(max_col, c.end_col);
  }
  return {max_row + 1, max_col + 1};
}

inline std::vector<std::string> row_contents(const LogicalTable& t, int row) {
  std::vector<const LogicalCell*> cells;
  for (const auto& c : t.cells)
    if (c.start_row <= row && row <= c.end_row) cells.push_back(&c);
  std::sort(cells.begin(), cells.end(),
            [](const LogicalCell* a, const LogicalCell* b) { return a->start_col < b->start_col; });
  std::vector<std::string> out;
  for (const auto* c : cells) out.push_back(c->content);
  return out;
}

inline std::vector<std::string> col_contents(const LogicalTable& t, int col) {
  std::vector<const LogicalCell*> cells;
  for (const auto& c : t.cells)
    if (c.start_col <= col && col <= c.end_col) cells.push_back(&c);
  std::sort(cells.begin(), cells.end(),
            [](const LogicalCell* a, const LogicalCell* b) { return a->start_row < b->start_row; });
  std::vector<std::string> out;
  for (const auto* c : cells) out.push_back(c->content);
  return out;
}

inline std::vector<std::string> merged_contents(const LogicalTable& t) {
  std::vector<std::string> out;
  for (const auto& c : t.cells)
    if (c.end_row > c.start_row || c.end_col > c.start_col) out.push_back(c.content);
  return out;
}

inline const LogicalCell* cell_at(const LogicalTable& t, int row, int col) {
  for (const auto& c : t.cells)
    if (c.start_row <= row && row <= c.end_row && c.start_col <= col && col <= c.end_col)
      return &c;
  return nullptr;
}

inline std::mt19937_64 kind_rng(uint64_t seed, TaskKind kind) {
  return std::mt19937_64(seed ^ fnv1a64(to_string(kind)));
}

}  // namespace detail

struct TaskGenResult {
  std::vector<HierTask> tasks;
  std::vector<std::string> notes;
};

/// Re-derives a task's gold answer from the table; generation self-checks
/// with this, and tests can call it directly.
inline bool verify_task(const HierTask& task, const LogicalTable& gold) {
  switch (task.kind) {
    case TaskKind::Vtsd: return task.gold_size == detail::grid_size(gold);
    case TaskKind::Irdr: return task.gold_list == detail::row_contents(gold, task.row_index);
    case TaskKind::Icdr: return task.gold_list == detail::col_contents(gold, task.col_index);
    case TaskKind::Mcd: return task.gold_list == detail::merged_contents(gold);
    case TaskKind::Ccr: {
      const LogicalCell* c =
          detail::cell_at(gold, task.gold_location.first, task.gold_location.second);
      return c && c->content == task.query_content &&
             c->start_row == task.gold_location.first && c->start_col == task.gold_location.second;
    }
    case TaskKind::Icr: {
      const LogicalCell* c =
          detail::cell_at(gold, task.query_location.first, task.query_location.second);
      return c && c->content == task.gold_content;
    }
  }
  return false;
}

/// Generates the hierarchical tasks for one sample. Pure in (gold, seed):
/// each kind draws from its own seeded stream, so requesting a subset of
/// kinds does not change what the others sample. IRDR/ICDR emit
/// row_col_samples distinct indices each (default 1). A CCR task is
/// skipped with a note when no cell content is unique.
inline TaskGenResult generate_tasks(const LogicalTable& gold, const std::set<TaskKind>& kinds,
                                    uint64_t seed, int row_col_samples = 1) {
  TaskGenResult result;
  auto [rows, cols] = detail::grid_size(gold);
  if (rows <= 0 || cols <= 0) {
    result.notes.push_back("empty table: no tasks generated");
    return result;
  }
  auto add = [&](HierTask task) {
    task.sample_id = gold.id;
    if (!verify_task(task, gold))
      throw std::logic_error("generated task fails self-verification");
    result.tasks.push_back(std::move(task));
  };
  auto sample_indices = [&](int upper, TaskKind kind) {
    auto rng = detail::kind_rng(seed, kind);
    std::vector<int> all(static_cast<size_t>(upper));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min<size_t>(all.size(), static_cast<size_t>(std::max(1, row_col_samples))));
    std::sort(all.begin(), all.end());
    return all;
  };

  if (kinds.count(TaskKind::Vtsd)) {
    HierTask t;
    t.kind = TaskKind::Vtsd;
    t.gold_size = {rows, cols};
    add(std::move(t));
  }
  if (kinds.count(TaskKind::Irdr)) {
    for (int row : sample_indices(rows, TaskKind::Irdr)) {
      HierTask t;
      t.kind = TaskKind::Irdr;
      t.row_index = row;
      t.gold_list = detail::row_contents(gold, row);
      add(std::move(t));
    }
  }
  if (kinds.count(TaskKind::Icdr)) {
    for (int col : sample_indices(cols, TaskKind::Icdr)) {
      HierTask t;
      t.kind = TaskKind::Icdr;
      t.col_index = col;
      t.gold_list = detail::col_contents(gold, col);
      add(std::move(t));
    }
  }
  if (kinds.count(TaskKind::Mcd)) {
    HierTask t;
    t.kind = TaskKind::Mcd;
    t.gold_list = detail::merged_contents(gold);  // empty list allowed
    add(std::move(t));
  }
  if (kinds.count(TaskKind::Ccr)) {
    std::map<std::string, int> counts;
    for (const auto& c : gold.cells)
      if (!c.content.empty()) ++counts[c.content];
    std::vector<const LogicalCell*> unique;
    for (const auto& c : gold.cells)
      if (!c.content.empty() && counts[c.content] == 1) unique.push_back(&c);
    if (unique.empty()) {
      result.notes.push_back("CCR unavailable: no unique-content cell in " + gold.id);
    } else {
      auto rng = detail::kind_rng(seed, TaskKind::Ccr);
      const LogicalCell* pick = unique[rng() % unique.size()];
      HierTask t;
      t.kind = TaskKind::Ccr;
      t.query_content = pick->content;
      t.gold_location = {pick->start_row, pick->start_col};
      add(std::move(t));
    }
  }
  if (kinds.count(TaskKind::Icr)) {
    std::vector<std::pair<int, int>> covered;
    for (const auto& c : gold.cells)
      for (int r = c.start_row; r <= c.end_row; ++r)
        for (int cc = c.start_col; cc <= c.end_col; ++cc) covered.emplace_back(r, cc);
    std::sort(covered.begin(), covered.end());
    if (!covered.empty()) {
      auto rng = detail::kind_rng(seed, TaskKind::Icr);
      auto pick = covered[rng() % covered.size()];
      HierTask t;
      t.kind = TaskKind::Icr;
      t.query_location = pick;
      t.gold_content = detail::cell_at(gold, pick.first, pick.second)->content;
      add(std::move(t));
    }
  }
  return result;
}

struct TaskResult {
  TaskKind kind = TaskKind::Vtsd;
  std::string sample_id;
  double score = 0.0;
  std::string metric;  // "ACC" or "F1"
  bool parse_failed = false;
  std::string parsed;  // parsed answer, for debugging
  std::string response_digest;
};

namespace detail {

// text after the last "ANSWER:" marker, to end of line
inline std::optional<std::string> answer_line(std::string_view response) {
  std::string upper(response);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  size_t pos = upper.rfind("ANSWER:");
  if (pos == std::string::npos) return std::nullopt;
  size_t start = pos + 7;
  size_t eol = response.find('\n', start);
  if (eol == std::string_view::npos) eol = response.size();
  return std::string(response.substr(start, eol - start));
}

inline std::optional<std::pair<int, int>> parse_pair(const std::string& text,
                                                     const char* first_key,
                                                     const char* second_key) {
  std::regex re(std::string(first_key) + R"(\s*=\s*(\d+).*?)" + second_key + R"(\s*=\s*(\d+))",
                std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return std::make_pair(std::stoi(m[1]), std::stoi(m[2]));
}

inline std::optional<std::vector<std::string>> parse_list(const std::string& text) {
  size_t open = text.find('[');
  size_t close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr,
                                           /*allow_exceptions=*/false);
  if (!j.is_array()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (item.is_string())
      out.push_back(item.get<std::string>());
    else
      out.push_back(item.dump());
  }
  return out;
}

inline std::vector<std::string> normalize_all(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(normalize_text(s));
  return out;
}

}  // namespace detail

/// Scores a model response against the task's gold answer. Cell- and
/// table-level tasks (VTSD, CCR, ICR) use exact accuracy; list tasks
/// (IRDR, ICDR, MCD) use multiset micro-F1. Unparseable responses score 0
/// with the parse-failure flag set.
inline TaskResult score_task(const HierTask& task, std::string_view response) {
  TaskResult result;
  result.kind = task.kind;
  result.sample_id = task.sample_id;
  result.response_digest = digest_hex(response);
  result.metric =
      (task.kind == TaskKind::Irdr || task.kind == TaskKind::Icdr || task.kind == TaskKind::Mcd)
          ? "F1"
          : "ACC";

  auto answer = detail::answer_line(response);
  if (!answer) {
    result.parse_failed = true;
    return result;
  }
  switch (task.kind) {
    case TaskKind::Vtsd: {
      auto pair = detail::parse_pair(*answer, "rows", "cols");
      if (!pair) { result.parse_failed = true; return result; }
      result.parsed = "rows=" + std::to_string(pair->first) + ",cols=" + std::to_string(pair->second);
      result.score = exact_accuracy(*pair, task.gold_size);
      return result;
    }
    case TaskKind::Ccr: {
      auto pair = detail::parse_pair(*answer, "row", "col");
      if (!pair) { result.parse_failed = true; return result; }
      result.parsed = "row=" + std::to_string(pair->first) + ",col=" + std::to_string(pair->second);
      result.score = exact_accuracy(*pair, task.gold_location);
      return result;
    }
    case TaskKind::Icr: {
      result.parsed = normalize_text(*answer);
      result.score = exact_accuracy(*answer, task.gold_content);
      return result;
    }
    case TaskKind::Irdr:
    case TaskKind::Icdr:
    case TaskKind::Mcd: {
      auto list = detail::parse_list(*answer);
      if (!list) { result.parse_failed = true; return result; }
      auto pred = detail::normalize_all(*list);
      auto gold = detail::normalize_all(task.gold_list);
      result.parsed = nlohmann::json(pred).dump();
      result.score = micro_f1(pred, gold);
      return result;
    }
  }
  result.parse_failed = true;
  return result;
}

/// Prompt bindings for a task's template.
inline std::pair<PromptId, std::map<std::string, std::string>> task_prompt(const HierTask& task) {
  switch (task.kind) {
    case TaskKind::Vtsd: return {PromptId::Vtsd, {}};
    case TaskKind::Mcd: return {PromptId::Mcd, {}};
    case TaskKind::Ccr: return {PromptId::Ccr, {{"cell_content", task.query_content}}};
    case TaskKind::Icr:
      return {PromptId::Icr,
              {{"cell_location", "row " + std::to_string(task.query_location.first) + ", column " +
                                     std::to_string(task.query_location.second)}}};
    case TaskKind::Irdr: return {PromptId::Irdr, {{"row_index", std::to_string(task.row_index)}}};
    case TaskKind::Icdr: return {PromptId::Icdr, {{"col_index", std::to_string(task.col_index)}}};
  }
  return {PromptId::Vtsd, {}};
}

struct BenchSample {
  std::string id;
  std::filesystem::path image_path;
  LogicalTable gold;
};

struct BenchOptions {
  std::set<TaskKind> kinds = all_task_kinds();
  uint64_t seed = 0;
  int workers = 4;
  int row_col_diff_filter = 3;  // |rows-cols| <= this for the filtered view
  int row_col_samples = 1;      // IRDR/ICDR indices sampled per table
};

/// Per-sample task seed: mixes the corpus seed with the sample id so task
/// sampling is reproducible per sample and independent of corpus order.
inline uint64_t bench_sample_seed(uint64_t seed, const std::string& id) {
  return seed ^ fnv1a64(id);
}

struct BenchAggregate {
  double mean = 0.0;
  size_t count = 0;
};

struct BenchResult {
  std::vector<TaskResult> results;  // corpus order, tasks in generation order
  std::vector<bool> filtered_in;    // parallel to results
  std::map<TaskKind, BenchAggregate> full;
  std::map<TaskKind, BenchAggregate> filtered;
  std::vector<std::string> notes;
  size_t n_failed_samples = 0;
};

inline void aggregate_bench(BenchResult& r) {
  std::map<TaskKind, double> sum_full, sum_filtered;
  std::map<TaskKind, size_t> n_full, n_filtered;
  for (size_t i = 0; i < r.results.size(); ++i) {
    TaskKind k = r.results[i].kind;
    sum_full[k] += r.results[i].score;
    ++n_full[k];
    if (r.filtered_in[i]) {
      sum_filtered[k] += r.results[i].score;
      ++n_filtered[k];
    }
  }
  for (const auto& [k, n] : n_full) r.full[k] = {sum_full[k] / static_cast<double>(n), n};
  for (const auto& [k, n] : n_filtered)
    r.filtered[k] = {sum_filtered[k] / static_cast<double>(n), n};
}

/// Runs the hierarchical benchmark over an ingested corpus: generate
/// tasks, render the task prompt, query the model at temperature 0, score,
/// aggregate per kind (full plus the |rows-cols|<=3 filtered view).
/// Per-sample failures are recorded and the batch continues.
inline BenchResult run_benchmark(const std::vector<BenchSample>& samples, Gateway& gateway,
                                 const PromptRegistry& prompts, const BenchOptions& options) {
  struct SampleOut {
    std::vector<TaskResult> results;
    bool filtered = false;
    std::string note;
    bool failed = false;
  };

  auto gate = std::make_shared<std::counting_semaphore<>>(std::max(1, options.workers));
  std::vector<std::future<SampleOut>> futures;
  futures.reserve(samples.size());
  for (const auto& sample : samples) {
    futures.push_back(std::async(std::launch::async, [&, sample] {
      SampleOut out;
      gate->acquire();
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{*gate};
      try {
        TableImage img = load_image(sample.image_path.string(), sample.id);
        auto [rows, cols] = detail::grid_size(sample.gold);
        out.filtered = std::abs(rows - cols) <= options.row_col_diff_filter;
        TaskGenResult gen =
            generate_tasks(sample.gold, options.kinds, bench_sample_seed(options.seed, sample.id),
                           options.row_col_samples);
        if (!gen.notes.empty()) out.note = gen.notes.front();
        for (const auto& task : gen.tasks) {
          auto [prompt_id, bindings] = task_prompt(task);
          VisionRequest req = prompts.build_request(prompt_id, bindings, {&img}, {});
          Completion c = gateway.complete(req);
          out.results.push_back(score_task(task, c.text));
        }
      } catch (const std::exception& e) {
        out.failed = true;
        out.note = sample.id + ": " + e.what();
        out.results.clear();  // failed samples contribute no scores
      }
      return out;
    }));
  }

  BenchResult result;
  for (auto& f : futures) {
    SampleOut out = f.get();
    if (out.failed) ++result.n_failed_samples;
    if (!out.note.empty()) result.notes.push_back(out.note);
    for (auto& tr : out.results) {
      result.results.push_back(std::move(tr));
      result.filtered_in.push_back(out.filtered);
    }
  }
  aggregate_bench(result);
  return result;
}

inline nlohmann::json bench_summary_json(const BenchResult& result) {
  nlohmann::json by_kind;
  for (TaskKind k : all_task_kinds()) {
    nlohmann::json entry;
    auto full_it = result.full.find(k);
    entry["full"] = full_it == result.full.end()
                        ? nlohmann::json(nullptr)
                        : nlohmann::json{{"mean", full_it->second.mean},
                                         {"count", full_it->second.count}};
    auto filt_it = result.filtered.find(k);
    entry["row_col_balanced"] = filt_it == result.filtered.end()
                                    ? nlohmann::json(nullptr)
                                    : nlohmann::json{{"mean", filt_it->second.mean},
                                                     {"count", filt_it->second.count}};
    by_kind[to_string(k)] = entry;
  }
  return nlohmann::json{{"by_kind", by_kind},
                        {"n_results", result.results.size()},
                        {"n_failed_samples", result.n_failed_samples},
                        {"notes", result.notes}};
}

inline void write_bench_outputs(const BenchResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream lines(out_dir / "bench.jsonl");
  for (size_t i = 0; i < result.results.size(); ++i) {
    const TaskResult& r = result.results[i];
    lines << nlohmann::json{{"id", r.sample_id},
                            {"kind", to_string(r.kind)},
                            {"score", r.score},
                            {"metric", r.metric},
                            {"parse_failed", r.parse_failed},
                            {"parsed", r.parsed},
                            {"response_digest", r.response_digest},
                            {"in_filtered_view", static_cast<bool>(result.filtered_in[i])}}
                 .dump()
          << "\n";
  }
  std::ofstream summary(out_dir / "bench_summary.json");
  summary << bench_summary_json(result).dump(2) << "\n";
}

}  // namespace ngtr
