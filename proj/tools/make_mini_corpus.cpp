// Regenerates the bundled offline fixtures under data/: the 10-sample
// mini corpus (clean train images + blurred test images + gold), the
// prebuilt neighbor store, the recorded mock script that replays a full
// pipeline run deterministically, and the prompt template files.
//
// Run from the repository root:  ngtr_make_mini [repo_root]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "ngtr/batch.hpp"
#include "ngtr/degrade.hpp"
#include "ngtr/ingest.hpp"
#include "ngtr/pipeline.hpp"
#include "ngtr/store.hpp"
#include "ngtr/synth.hpp"

namespace fs = std::filesystem;
using namespace ngtr;

namespace {

constexpr int kSamples = 10;

// same recipe as the retrieval fixtures: unique text per table plus
// per-index render geometry, large enough to survive sigma-2 blur
LogicalTable mini_table(int index) {
  std::mt19937_64 rng(4242 + index * 101);
  LayoutGenOptions opt;
  opt.min_rows = 3;
  opt.min_cols = 3;
  opt.max_rows = 6;
  opt.max_cols = 6;
  opt.max_span = 2;
  opt.empty_content_prob = 0.0;
  opt.special_chars = false;
  LogicalTable t = random_logical_table(rng, opt);
  std::uniform_int_distribution<int> len(4, 9), ch(0, 35);
  for (auto& cell : t.cells) {
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i) {
      int v = ch(rng);
      s += v < 26 ? static_cast<char>('a' + v) : static_cast<char>('0' + v - 26);
    }
    cell.content = s;
  }
  t.id = "train-" + std::to_string(index);
  return t;
}

TableImage mini_image(const LogicalTable& t, int index) {
  RenderOptions render;
  render.cell_width = 100 + (index * 13) % 36;
  render.cell_height = 46 + (index * 7) % 14;
  render.font_scale = 0.6 + 0.04 * (index % 5);
  render.line_px = 2;
  render.background = 218 + (index * 17) % 36;
  return render_table_image(t, render, t.id);
}

std::string perturb_markup(const std::string& markup, int which) {
  LogicalTable t = markup_to_logical(parse_markup(markup));
  if (!t.cells.empty()) {
    size_t idx = static_cast<size_t>(which) % t.cells.size();
    t.cells[idx].content = "misread" + std::to_string(which);
  }
  return logical_to_markup(t);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path(".");
  fs::path mini = root / "data" / "mini";
  fs::remove_all(mini);
  fs::create_directories(mini / "train_images");
  fs::create_directories(mini / "test_images");

  PromptRegistry prompts = PromptRegistry::builtin();
  prompts.dump_dir(root / "data" / "prompts");

  // ---- train corpus + store ----
  std::vector<GoldSample> train_gold;
  std::vector<StoreSource> sources;
  std::vector<TableImage> train_images;
  for (int i = 0; i < kSamples; ++i) {
    LogicalTable t = mini_table(i);
    TableImage img = mini_image(t, i);
    fs::path img_path = mini / "train_images" / (t.id + ".png");
    save_png(img, img_path.string());
    train_images.push_back(img);

    GoldSample gs;
    gs.id = t.id;
    gs.image_path = "train_images/" + t.id + ".png";
    gs.table = t;
    gs.markup = logical_to_markup(t);
    train_gold.push_back(gs);
    std::string traits = "synthetic ruled table, grayscale, medium resolution";
    sources.push_back(StoreSource{t.id, img_path, gs.markup, traits});
  }
  write_canonical_jsonl(train_gold, mini / "train_gold.jsonl");
  fs::path store_dir = mini / "store";
  StoreBuildStats store_stats;
  NeighborStore store = build_store(sources, store_dir, &store_stats);
  save_store(store, store_dir);
  std::cout << "store: " << store_stats.added << " records\n";

  // ---- test corpus: blurred copies of the train images ----
  std::vector<GoldSample> test_gold;
  std::vector<CorpusSample> test_samples;
  for (int i = 0; i < kSamples; ++i) {
    TableImage blurred = degrade(train_images[i], Scenario::Blur, static_cast<uint64_t>(i));
    std::string id = "mini-" + std::to_string(i);
    blurred.id = id;
    fs::path img_path = mini / "test_images" / (id + ".png");
    save_png(blurred, img_path.string());

    GoldSample gs;
    gs.id = id;
    gs.image_path = "test_images/" + id + ".png";
    gs.table = train_gold[i].table;
    gs.table.id = id;
    gs.markup = train_gold[i].markup;
    test_gold.push_back(gs);
    test_samples.push_back(CorpusSample{id, img_path, gs.markup});
  }
  write_canonical_jsonl(test_gold, mini / "gold.jsonl");

  // ---- response policy, simulated from the pipeline's own pieces ----
  PipelineConfig cfg;
  const std::vector<ToolPlan> plans = {
      ToolPlan{{ToolId::Upscale}, ToolPlan::Origin::ModelGenerated},
      ToolPlan{{ToolId::NoiseReduce, ToolId::Binarize}, ToolPlan::Origin::ModelGenerated},
      ToolPlan{{ToolId::BorderEnhance}, ToolPlan::Origin::ModelGenerated},
  };
  const std::string plans_reply =
      R"([["Upscale"],["NoiseReduce","Binarize"],["BorderEnhance"]])";

  // digest of a processed image -> recognition reply. The winning plan is
  // a function of the neighbor, so samples that retrieve the same neighbor
  // see consistent scores and the map stays collision-free.
  auto winner_of = [&](int neighbor_index) {
    return neighbor_index % static_cast<int>(plans.size());
  };
  std::map<std::string, std::string> by_digest;
  for (int k = 0; k < kSamples; ++k) {
    const NeighborRecord& neighbor = store.records[static_cast<size_t>(k)];
    TableImage neighbor_img =
        load_image(resolve_record_image(neighbor, store_dir).string(), neighbor.id);
    for (size_t p = 0; p < plans.size(); ++p) {
      TableImage processed = execute_plan(neighbor_img, plans[p], cfg.toolkit);
      by_digest[pixel_digest(processed)] =
          static_cast<int>(p) == winner_of(k) ? neighbor.gold_markup
                                              : perturb_markup(neighbor.gold_markup,
                                                               static_cast<int>(p) + k);
    }
  }
  for (int i = 0; i < kSamples; ++i) {
    // reload from disk so digests match what the replayed run will see
    TableImage test_img =
        load_image((mini / "test_images" / ("mini-" + std::to_string(i) + ".png")).string());
    auto hits = retrieve(test_img, store, 1, cfg.features);
    int neighbor_index = -1;
    for (size_t k = 0; k < store.records.size(); ++k)
      if (store.records[k].id == hits[0].record->id) neighbor_index = static_cast<int>(k);
    // reflection accepts everything, so the final image is the winner plan
    // applied to the test image; a few samples get an imperfect reading
    TableImage final_img =
        execute_plan(test_img, plans[static_cast<size_t>(winner_of(neighbor_index))], cfg.toolkit);
    by_digest[pixel_digest(final_img)] =
        i % 4 == 3 ? perturb_markup(test_gold[static_cast<size_t>(i)].markup, 90 + i)
                   : test_gold[static_cast<size_t>(i)].markup;
  }

  auto policy = std::make_shared<CallbackClient>([&](const VisionRequest& req) -> std::string {
    if (req.template_id == "PlanGeneration") return plans_reply;
    if (req.template_id == "Reflection") return "IMAGE_2";
    auto it = by_digest.find(req.images[0].digest);
    if (it != by_digest.end()) return it->second;
    return "unscripted image";  // scores 0 and is visible in reports
  });
  auto recorder = std::make_shared<RecordingClient>(policy);
  Gateway gateway(recorder, RetryPolicy{0, 0, 1.0});

  BatchOptions options;
  options.workers = 2;
  options.store_dir = store_dir;
  BatchResult result = run_batch(test_samples, store, gateway, prompts,
                                 default_tool_descriptors(), cfg, options);
  recorder->recorded()->to_jsonl((mini / "mock_script.jsonl").string());

  std::cout << "recorded run: ok=" << result.n_ok << " mean_teds=" << result.mean_teds
            << " mean_struct=" << result.mean_teds_struct << "\n";
  bool clean = result.n_ok == static_cast<size_t>(kSamples);
  for (const auto& report : result.reports) {
    if (!report.ok)
      std::cerr << "  sample " << report.id << " failed at " << report.error_stage << ": "
                << report.error_message << "\n";
    if (report.ok && report.final_markup.empty()) {
      std::cerr << "  sample " << report.id << " hit an unscripted image\n";
      clean = false;
    }
  }

  // run config pointing at the bundled pieces, paths relative to data/mini
  nlohmann::json run_config = {
      {"endpoint", {{"kind", "mock"}, {"mock_script", "mock_script.jsonl"}}},
      {"store", "store"},
      {"input", "gold.jsonl"},
      {"output_dir", "out"},
      {"workers", 2},
      {"seed", 0},
  };
  std::ofstream cfg_out(mini / "run_config.json");
  cfg_out << run_config.dump(2) << "\n";

  std::cout << "mini corpus written to " << mini << "\n";
  return clean ? 0 : 1;
}
