// Command-line entry point: ingest stores, degrade corpora, run the
// neighbor-guided pipeline or direct recognition, run benchmarks, score
// prediction files, convert logical structures to markup.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ngtr/batch.hpp"
#include "ngtr/benchmark.hpp"
#include "ngtr/degrade.hpp"
#include "ngtr/http_client.hpp"
#include "ngtr/ingest.hpp"
#include "ngtr/pipeline.hpp"
#include "ngtr/store.hpp"
#include "ngtr/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

// ---------- text tables for human summaries ----------

void print_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows)
    for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c)
      std::cout << std::left << std::setw(static_cast<int>(widths[c]) + 2) << row[c];
    std::cout << "\n";
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

// ---------- config file + overrides ----------

struct RunConfig {
  ngtr::ModelEndpoint endpoint;
  fs::path store_dir;
  fs::path input;
  fs::path prompt_dir;
  fs::path output_dir = "out";
  ngtr::PipelineConfig pipeline;
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  size_t limit = 0;  // 0 = all
  uint64_t seed = 0;
  std::string kinds;       // bench only, csv
  int row_col_samples = 1;  // bench only: row/column indices sampled per table
};

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ngtr::FormatError("cannot read config file: " + path.string());
  return json::parse(in, nullptr, true, /*ignore_comments=*/true);
}

void apply_config_json(RunConfig& cfg, const json& j, const fs::path& config_dir) {
  auto path_of = [&](const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p : config_dir / p;
  };
  if (j.contains("endpoint")) {
    const json& e = j["endpoint"];
    std::string kind = e.value("kind", "mock");
    cfg.endpoint.kind = kind == "http" ? ngtr::ModelEndpoint::Kind::HttpChatCompletions
                                       : ngtr::ModelEndpoint::Kind::ScriptedMock;
    cfg.endpoint.base_url = e.value("base_url", "");
    cfg.endpoint.model = e.value("model", "");
    cfg.endpoint.api_key_env = e.value("api_key_env", "");
    if (e.contains("mock_script"))
      cfg.endpoint.mock_script = path_of(e["mock_script"].get<std::string>()).string();
    cfg.endpoint.retry.max_retries = e.value("max_retries", cfg.endpoint.retry.max_retries);
    cfg.endpoint.retry.backoff_ms = e.value("backoff_ms", cfg.endpoint.retry.backoff_ms);
    cfg.endpoint.timeout_sec = e.value("timeout_sec", cfg.endpoint.timeout_sec);
  }
  if (j.contains("store")) cfg.store_dir = path_of(j["store"].get<std::string>());
  if (j.contains("input")) cfg.input = path_of(j["input"].get<std::string>());
  if (j.contains("prompt_dir")) cfg.prompt_dir = path_of(j["prompt_dir"].get<std::string>());
  if (j.contains("output_dir")) cfg.output_dir = path_of(j["output_dir"].get<std::string>());
  auto& p = cfg.pipeline;
  p.max_plan_len = j.value("L", j.value("max_plan_len", p.max_plan_len));
  p.plans_per_generation = j.value("N", j.value("plans_per_generation", p.plans_per_generation));
  p.plan_temperature = j.value("plan_temperature", p.plan_temperature);
  p.recognition_temperature = j.value("recognition_temperature", p.recognition_temperature);
  p.top_p = j.value("top_p", p.top_p);
  p.reflection_enabled = j.value("reflection_enabled", p.reflection_enabled);
  p.experience_enabled = j.value("experience_enabled", p.experience_enabled);
  p.use_cot = j.value("use_cot", p.use_cot);
  p.budget_override = j.value("budget", p.budget_override);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.limit = j.value("limit", cfg.limit);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.kinds = j.value("kinds", cfg.kinds);
  cfg.row_col_samples = j.value("row_col_samples", cfg.row_col_samples);
}

json effective_config_json(const RunConfig& cfg) {
  return json{
      {"endpoint",
       {{"kind", cfg.endpoint.kind == ngtr::ModelEndpoint::Kind::HttpChatCompletions ? "http"
                                                                                     : "mock"},
        {"base_url", cfg.endpoint.base_url},
        {"model", cfg.endpoint.model},
        {"api_key_env", cfg.endpoint.api_key_env},
        {"mock_script", cfg.endpoint.mock_script},
        {"max_retries", cfg.endpoint.retry.max_retries},
        {"backoff_ms", cfg.endpoint.retry.backoff_ms}}},
      {"store", cfg.store_dir.string()},
      {"input", cfg.input.string()},
      {"prompt_dir", cfg.prompt_dir.string()},
      {"output_dir", cfg.output_dir.string()},
      {"max_plan_len", cfg.pipeline.max_plan_len},
      {"plans_per_generation", cfg.pipeline.plans_per_generation},
      {"plan_temperature", cfg.pipeline.plan_temperature},
      {"recognition_temperature", cfg.pipeline.recognition_temperature},
      {"top_p", cfg.pipeline.top_p},
      {"reflection_enabled", cfg.pipeline.reflection_enabled},
      {"experience_enabled", cfg.pipeline.experience_enabled},
      {"use_cot", cfg.pipeline.use_cot},
      {"workers", cfg.workers},
      {"limit", cfg.limit},
      {"seed", cfg.seed},
      {"version", ngtr::kVersion},
  };
}

void echo_config(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "effective_config.json");
  out << effective_config_json(cfg).dump(2) << "\n";
}

ngtr::PromptRegistry load_prompts(const RunConfig& cfg) {
  if (!cfg.prompt_dir.empty() && fs::is_directory(cfg.prompt_dir))
    return ngtr::PromptRegistry::load_dir(cfg.prompt_dir);
  return ngtr::PromptRegistry::builtin();
}

// corpus image paths resolve relative to the manifest's directory
std::vector<ngtr::CorpusSample> corpus_from_canonical(const fs::path& input, size_t limit) {
  ngtr::IngestStats stats;
  std::vector<ngtr::GoldSample> gold = ngtr::read_canonical_jsonl(input, &stats);
  if (stats.skipped) std::cerr << "warning: skipped " << stats.skipped << " malformed lines\n";
  std::vector<ngtr::CorpusSample> out;
  fs::path base = input.parent_path();
  for (const auto& s : gold) {
    fs::path img(s.image_path);
    out.push_back(ngtr::CorpusSample{s.id, img.is_absolute() ? img : base / img, s.markup});
    if (limit && out.size() >= limit) break;
  }
  return out;
}

// ---------- subcommand implementations ----------

int cmd_ingest(const std::string& kind, const fs::path& input, const fs::path& output,
               size_t limit) {
  if (!fs::exists(input)) {
    std::cerr << "error: input does not exist: " << input << "\n";
    return kExitUsage;
  }
  ngtr::IngestStats stats;
  std::vector<ngtr::GoldSample> samples;
  if (kind == "pubtabnet")
    samples = ngtr::ingest_pubtabnet(input, &stats);
  else if (kind == "scitsr")
    samples = ngtr::ingest_scitsr(input, &stats);
  else
    samples = ngtr::read_canonical_jsonl(input, &stats);
  if (limit && samples.size() > limit) samples.resize(limit);

  fs::create_directories(output);
  fs::path base = fs::is_directory(input) ? input : input.parent_path();
  // rebase image paths onto the output dir
  for (auto& s : samples) {
    if (s.image_path.empty()) continue;
    fs::path img(s.image_path);
    if (!img.is_absolute()) img = base / img;
    std::error_code ec;
    fs::path rel = fs::relative(img, output, ec);
    s.image_path = ec ? img.string() : rel.generic_string();
  }
  ngtr::write_canonical_jsonl(samples, output / "gold.jsonl");

  std::vector<ngtr::StoreSource> sources;
  for (const auto& s : samples) {
    if (s.missing_image || s.image_path.empty()) continue;
    fs::path img(s.image_path);
    sources.push_back(
        ngtr::StoreSource{s.id, img.is_absolute() ? img : output / img, s.markup, ""});
  }
  ngtr::StoreBuildStats build_stats;
  fs::path store_dir = output / "store";
  ngtr::NeighborStore store = ngtr::build_store(sources, store_dir, &build_stats);
  ngtr::save_store(store, store_dir);

  std::cout << "ingested " << stats.read << " records (" << stats.skipped << " skipped)\n";
  std::cout << "store: " << build_stats.added << " records ("
            << build_stats.skipped_unreadable << " unreadable, "
            << build_stats.skipped_featureless << " featureless, "
            << build_stats.skipped_bad_markup << " bad markup)\n";
  if (samples.empty()) std::cerr << "warning: empty corpus\n";
  return kExitOk;
}

int cmd_run(const RunConfig& cfg) {
  if (cfg.endpoint.kind == ngtr::ModelEndpoint::Kind::ScriptedMock &&
      cfg.endpoint.mock_script.empty()) {
    std::cerr << "error: no endpoint configured; pass --mock <script> or configure an http "
                 "endpoint in the config file\n";
    return kExitUsage;
  }
  echo_config(cfg);
  ngtr::NeighborStore store = ngtr::load_store(cfg.store_dir);
  std::vector<ngtr::CorpusSample> samples = corpus_from_canonical(cfg.input, cfg.limit);
  ngtr::PromptRegistry prompts = load_prompts(cfg);
  ngtr::Gateway gateway(ngtr::make_client(cfg.endpoint), cfg.endpoint.retry,
                        std::max(1, cfg.workers));
  ngtr::BatchOptions options;
  options.workers = cfg.workers;
  options.store_dir = cfg.store_dir;
  ngtr::BatchResult result = ngtr::run_batch(samples, store, gateway, prompts,
                                             ngtr::default_tool_descriptors(), cfg.pipeline,
                                             options);
  ngtr::write_batch_outputs(result, store, cfg.output_dir);

  std::vector<std::vector<std::string>> table = {
      {"samples", "ok", "scored", "mean TEDS", "mean TEDS-Struct"},
      {std::to_string(result.reports.size()), std::to_string(result.n_ok),
       std::to_string(result.n_scored), fmt(result.mean_teds), fmt(result.mean_teds_struct)}};
  print_table(table);
  std::vector<std::vector<std::string>> usage = {{"tool", "usage rate"}};
  for (const auto& [tool, rate] : result.tool_usage_rates)
    usage.push_back({ngtr::to_string(tool), fmt(rate)});
  print_table(usage);
  std::cout << "wrote " << (cfg.output_dir / "reports.jsonl").string() << "\n";

  if (result.n_ok == 0 && !result.reports.empty()) return kExitPartial;
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg) {
  if (cfg.endpoint.kind == ngtr::ModelEndpoint::Kind::ScriptedMock &&
      cfg.endpoint.mock_script.empty()) {
    std::cerr << "error: no endpoint configured; pass --mock <script> or configure an http "
                 "endpoint in the config file\n";
    return kExitUsage;
  }
  echo_config(cfg);
  ngtr::IngestStats stats;
  std::vector<ngtr::GoldSample> gold = ngtr::read_canonical_jsonl(cfg.input, &stats);
  std::vector<ngtr::BenchSample> samples;
  fs::path base = cfg.input.parent_path();
  for (const auto& s : gold) {
    fs::path img(s.image_path);
    samples.push_back(ngtr::BenchSample{s.id, img.is_absolute() ? img : base / img, s.table});
    if (cfg.limit && samples.size() >= cfg.limit) break;
  }

  ngtr::BenchOptions options;
  options.seed = cfg.seed;
  options.workers = cfg.workers;
  options.row_col_samples = std::max(1, cfg.row_col_samples);
  if (!cfg.kinds.empty()) {
    options.kinds.clear();
    std::stringstream ss(cfg.kinds);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto kind = ngtr::task_kind_from_string(item);
      if (!kind) {
        std::cerr << "error: unknown task kind '" << item << "'\n";
        return kExitUsage;
      }
      options.kinds.insert(*kind);
    }
  }
  ngtr::PromptRegistry prompts = load_prompts(cfg);
  ngtr::Gateway gateway(ngtr::make_client(cfg.endpoint), cfg.endpoint.retry,
                        std::max(1, cfg.workers));
  ngtr::BenchResult result = ngtr::run_benchmark(samples, gateway, prompts, options);
  ngtr::write_bench_outputs(result, cfg.output_dir);

  std::vector<std::vector<std::string>> table = {{"task", "mean", "n", "mean (|r-c|<=3)", "n"}};
  for (ngtr::TaskKind k : ngtr::all_task_kinds()) {
    auto full = result.full.find(k);
    auto filt = result.filtered.find(k);
    table.push_back({ngtr::to_string(k),
                     full == result.full.end() ? "-" : fmt(full->second.mean),
                     full == result.full.end() ? "0" : std::to_string(full->second.count),
                     filt == result.filtered.end() ? "-" : fmt(filt->second.mean),
                     filt == result.filtered.end() ? "0" : std::to_string(filt->second.count)});
  }
  print_table(table);
  if (result.n_failed_samples) {
    std::cerr << result.n_failed_samples << " samples failed\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_degrade(const fs::path& input, const fs::path& output, const std::string& scenarios_csv,
                uint64_t seed) {
  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      auto ext = entry.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else if (fs::exists(input)) {
    inputs.push_back(input);
  } else {
    std::cerr << "error: input does not exist: " << input << "\n";
    return kExitUsage;
  }

  std::vector<ngtr::Scenario> scenarios;
  if (scenarios_csv == "all") {
    scenarios = ngtr::all_scenarios();
  } else {
    std::stringstream ss(scenarios_csv);
    std::string item;
    while (std::getline(ss, item, ',')) scenarios.push_back(ngtr::scenario_from_string(item));
  }

  fs::create_directories(output);
  std::ofstream manifest(output / "manifest.jsonl");
  ngtr::DegradeConfig dc;
  size_t failures = 0;
  for (const auto& path : inputs) {
    std::string id = path.stem().string();
    ngtr::TableImage img;
    try {
      img = ngtr::load_image(path.string(), id);
    } catch (const ngtr::Error& e) {
      std::cerr << "skip " << path << ": " << e.what() << "\n";
      ++failures;
      continue;
    }
    for (ngtr::Scenario s : scenarios) {
      ngtr::TableImage out = ngtr::degrade(img, s, seed, dc);
      std::string name = id + "__" + ngtr::to_string(s) + ".png";
      ngtr::save_png(out, (output / name).string());
      manifest << json{{"id", id},
                       {"scenario", ngtr::to_string(s)},
                       {"seed", seed},
                       {"params", ngtr::degrade_params_string(s, dc)},
                       {"file", name}}
                      .dump()
               << "\n";
    }
  }
  std::cout << "wrote " << inputs.size() - failures << " x " << scenarios.size()
            << " degraded images to " << output << "\n";
  return failures ? kExitPartial : kExitOk;
}

// markup inputs: .jsonl of {id, markup} or a raw single-markup file
std::vector<std::pair<std::string, std::string>> read_markup_file(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::ifstream in(path);
  if (!in) throw ngtr::FormatError("cannot read " + path.string());
  if (path.extension() == ".jsonl") {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("id") || !j.contains("markup")) continue;
      out.emplace_back(j["id"].get<std::string>(), j["markup"].get<std::string>());
    }
  } else {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    out.emplace_back(path.stem().string(), text);
  }
  return out;
}

int cmd_score(const fs::path& pred_path, const fs::path& gold_path, const fs::path& output) {
  auto preds = read_markup_file(pred_path);
  auto golds = read_markup_file(gold_path);
  std::map<std::string, std::string> pred_by_id(preds.begin(), preds.end());

  fs::create_directories(output);
  std::ofstream lines(output / "scores.jsonl");
  double teds_sum = 0, struct_sum = 0;
  size_t scored = 0, missing = 0;
  for (const auto& [id, gold_markup] : golds) {
    auto it = pred_by_id.find(id);
    if (it == pred_by_id.end()) {
      ++missing;
      lines << json{{"id", id}, {"error", "no prediction"}}.dump() << "\n";
      continue;
    }
    try {
      ngtr::TedsScore full = ngtr::teds(it->second, gold_markup, ngtr::CostModel::Mode::Full);
      ngtr::TedsScore structure =
          ngtr::teds(it->second, gold_markup, ngtr::CostModel::Mode::StructOnly);
      lines << json{{"id", id},
                    {"teds", full.value},
                    {"teds_struct", structure.value},
                    {"size_pred", full.size_a},
                    {"size_gold", full.size_b}}
                   .dump()
            << "\n";
      teds_sum += full.value;
      struct_sum += structure.value;
      ++scored;
    } catch (const ngtr::Error& e) {
      ++missing;
      lines << json{{"id", id}, {"error", e.what()}}.dump() << "\n";
    }
  }
  json summary = {{"n_gold", golds.size()},
                  {"n_scored", scored},
                  {"n_unscored", missing},
                  {"mean_teds", scored ? teds_sum / scored : 0.0},
                  {"mean_teds_struct", scored ? struct_sum / scored : 0.0},
                  {"wrapper_policy", "flatten"}};
  std::ofstream summary_out(output / "score_summary.json");
  summary_out << summary.dump(2) << "\n";

  print_table({{"scored", "unscored", "mean TEDS", "mean TEDS-Struct"},
               {std::to_string(scored), std::to_string(missing),
                fmt(scored ? teds_sum / scored : 0.0), fmt(scored ? struct_sum / scored : 0.0)}});
  return missing ? kExitPartial : kExitOk;
}

int cmd_convert(const fs::path& input, const fs::path& output) {
  ngtr::IngestStats stats;
  std::vector<ngtr::GoldSample> samples = ngtr::read_canonical_jsonl(input, &stats);
  if (!output.parent_path().empty()) fs::create_directories(output.parent_path());
  std::ofstream out(output);
  if (!out) {
    std::cerr << "error: cannot write " << output << "\n";
    return kExitUsage;
  }
  for (const auto& s : samples) {
    std::string markup = ngtr::logical_to_markup(s.table);
    out << json{{"id", s.id}, {"markup", markup}}.dump() << "\n";
  }
  std::cout << "converted " << samples.size() << " tables (" << stats.skipped << " skipped)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NGTR: neighbor-guided toolchain reasoning for table recognition"};
  app.set_version_flag("--version", std::string("ngtr ") + ngtr::kVersion + " (" +
                                        ngtr::kStoreFormat + "; " + ngtr::kMockScriptFormat + ")");
  app.require_subcommand(1);

  // ingest
  std::string ingest_kind = "canonical";
  fs::path ingest_input, ingest_output;
  size_t ingest_limit = 0;
  auto* ingest = app.add_subcommand("ingest", "build a canonical corpus + neighbor store");
  ingest->add_option("--kind", ingest_kind, "pubtabnet|scitsr|canonical")
      ->check(CLI::IsMember({"pubtabnet", "scitsr", "canonical"}));
  ingest->add_option("--input", ingest_input, "dataset file or directory")->required();
  ingest->add_option("--output", ingest_output, "output directory")->required();
  ingest->add_option("--limit", ingest_limit, "max records");

  // shared run/bench options
  auto add_common = [&](CLI::App* cmd, RunConfig& cfg, fs::path& config_path, std::string& mock,
                        std::string& ablation) {
    cmd->add_option("--config", config_path, "config file (json, comments allowed)");
    cmd->add_option("--store", cfg.store_dir, "neighbor store directory");
    cmd->add_option("--input", cfg.input, "canonical gold.jsonl corpus");
    cmd->add_option("--mock", mock, "mock script jsonl (offline endpoint)");
    cmd->add_option("--output", cfg.output_dir, "output directory");
    cmd->add_option("--prompt-dir", cfg.prompt_dir, "prompt template directory");
    cmd->add_option("--limit", cfg.limit, "max samples");
    cmd->add_option("--workers", cfg.workers, "worker pool size");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("-L,--max-plan-len", cfg.pipeline.max_plan_len, "toolchain length cap");
    cmd->add_option("-N,--plans", cfg.pipeline.plans_per_generation, "plans per generation");
    cmd->add_option("--ablation", ablation, "no-exp|no-ref")
        ->check(CLI::IsMember({"no-exp", "no-ref", ""}));
    cmd->add_flag("--use-cot", cfg.pipeline.use_cot, "use the step-by-step recognition prompt");
  };

  RunConfig run_cfg;
  fs::path run_config_path;
  std::string run_mock, run_ablation;
  auto* run = app.add_subcommand("run", "run the NGTR pipeline over a corpus");
  add_common(run, run_cfg, run_config_path, run_mock, run_ablation);

  RunConfig bench_cfg;
  fs::path bench_config_path;
  std::string bench_mock, bench_ablation;
  auto* bench = app.add_subcommand("bench", "run the hierarchical recognition benchmark");
  add_common(bench, bench_cfg, bench_config_path, bench_mock, bench_ablation);
  bench->add_option("--kinds", bench_cfg.kinds, "comma-separated task kinds (default all)");
  bench->add_option("--row-col-samples", bench_cfg.row_col_samples,
                    "row/column indices sampled per table");

  // degrade
  fs::path degrade_input, degrade_output;
  std::string degrade_scenarios = "all";
  uint64_t degrade_seed = 0;
  auto* degrade_cmd = app.add_subcommand("degrade", "apply degradation scenarios to images");
  degrade_cmd->add_option("--input", degrade_input, "image file or directory")->required();
  degrade_cmd->add_option("--output", degrade_output, "output directory")->required();
  degrade_cmd->add_option("--scenarios", degrade_scenarios, "all or comma-separated names");
  degrade_cmd->add_option("--seed", degrade_seed, "seed recorded in the manifest");

  // score
  fs::path score_pred, score_gold, score_output = "out";
  auto* score = app.add_subcommand("score", "score predicted markup against gold with TEDS");
  score->add_option("--pred", score_pred, "predictions (.jsonl of id/markup, or raw markup)")
      ->required();
  score->add_option("--gold", score_gold, "gold (.jsonl of id/markup, or raw markup)")->required();
  score->add_option("--output", score_output, "output directory");

  // convert
  fs::path convert_input, convert_output;
  auto* convert = app.add_subcommand("convert", "logical cell structures -> markup jsonl");
  convert->add_option("--input", convert_input, "canonical gold.jsonl")->required();
  convert->add_option("--output", convert_output, "output markup jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  auto given = [](CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  auto finish_config = [&](RunConfig& cfg, const fs::path& config_path, const std::string& mock,
                           const std::string& ablation, CLI::App* cmd) {
    RunConfig merged;
    if (!config_path.empty())
      apply_config_json(merged, load_config_file(config_path), config_path.parent_path());
    // command-line overrides take precedence over file values
    if (given(cmd, "--store")) merged.store_dir = cfg.store_dir;
    if (given(cmd, "--input")) merged.input = cfg.input;
    if (given(cmd, "--output")) merged.output_dir = cfg.output_dir;
    if (given(cmd, "--prompt-dir")) merged.prompt_dir = cfg.prompt_dir;
    if (given(cmd, "--limit")) merged.limit = cfg.limit;
    if (given(cmd, "--workers")) merged.workers = cfg.workers;
    if (given(cmd, "--seed")) merged.seed = cfg.seed;
    if (given(cmd, "--max-plan-len")) merged.pipeline.max_plan_len = cfg.pipeline.max_plan_len;
    if (given(cmd, "--plans"))
      merged.pipeline.plans_per_generation = cfg.pipeline.plans_per_generation;
    if (given(cmd, "--use-cot")) merged.pipeline.use_cot = cfg.pipeline.use_cot;
    if (given(cmd, "--kinds")) merged.kinds = cfg.kinds;
    if (given(cmd, "--row-col-samples")) merged.row_col_samples = cfg.row_col_samples;
    if (!mock.empty()) {
      merged.endpoint.kind = ngtr::ModelEndpoint::Kind::ScriptedMock;
      merged.endpoint.mock_script = mock;
    }
    if (ablation == "no-exp") merged.pipeline.experience_enabled = false;
    if (ablation == "no-ref") merged.pipeline.reflection_enabled = false;
    return merged;
  };

  try {
    if (*ingest) return cmd_ingest(ingest_kind, ingest_input, ingest_output, ingest_limit);
    if (*run) return cmd_run(finish_config(run_cfg, run_config_path, run_mock, run_ablation, run));
    if (*bench)
      return cmd_bench(
          finish_config(bench_cfg, bench_config_path, bench_mock, bench_ablation, bench));
    if (*degrade_cmd)
      return cmd_degrade(degrade_input, degrade_output, degrade_scenarios, degrade_seed);
    if (*score) return cmd_score(score_pred, score_gold, score_output);
    if (*convert) return cmd_convert(convert_input, convert_output);
  } catch (const ngtr::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ngtr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
