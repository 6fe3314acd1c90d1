#include <catch2/catch_amalgamated.hpp>

#include "ngtr/batch.hpp"
#include "ngtr/degrade.hpp"
#include "ngtr/pipeline.hpp"
#include "ngtr/synth.hpp"
#include "support/image_fixtures.hpp"

using namespace ngtr;
using Catch::Approx;

namespace {

const std::string kGoldA =
    "<table><tr><td rowspan=1 colspan=2>quarterly revenue</td></tr>"
    "<tr><td rowspan=1 colspan=1>branch east</td><td rowspan=1 colspan=1>4821</td></tr>"
    "<tr><td rowspan=1 colspan=1>branch west</td><td rowspan=1 colspan=1>3790</td></tr></table>";
const std::string kGoldAOneOff =
    "<table><tr><td rowspan=1 colspan=2>quarterly revenue</td></tr>"
    "<tr><td rowspan=1 colspan=1>branch east</td><td rowspan=1 colspan=1>4821</td></tr>"
    "<tr><td rowspan=1 colspan=1>branch west</td><td rowspan=1 colspan=1>9999</td></tr></table>";

TableImage neighbor_image() {
  LogicalTable t = markup_to_logical(kGoldA);
  RenderOptions render;
  render.cell_width = 130;
  render.cell_height = 52;
  render.font_scale = 0.55;
  return render_table_image(t, render, "neighbor-0");
}

NeighborRecord neighbor_record() {
  NeighborRecord rec;
  rec.id = "neighbor-0";
  rec.gold_markup = kGoldA;
  rec.traits = "clean scan, thin borders";
  rec.features = extract_features(neighbor_image());
  return rec;
}

struct Harness {
  std::shared_ptr<CallbackClient> client;
  Gateway gateway;
  PromptRegistry prompts = PromptRegistry::builtin();
  PipelineConfig cfg;

  explicit Harness(CallbackClient::Fn fn)
      : client(std::make_shared<CallbackClient>(std::move(fn))),
        gateway(client, RetryPolicy{0, 0, 1.0}) {}

  PipelineSession session() { return PipelineSession{gateway, prompts, cfg}; }
};

}  // namespace

TEST_CASE("execute_plan composes tools in order") {
  TableImage img = imgfix::grid(200, 100);
  SECTION("empty plan is the identity") {
    TableImage out = execute_plan(img, empty_plan());
    CHECK(pixels_identical(img, out));
    CHECK(out.provenance.empty());
  }
  SECTION("upscale then binarize") {
    ToolPlan plan{{ToolId::Upscale, ToolId::Binarize}, ToolPlan::Origin::Manual};
    TableImage out = execute_plan(img, plan);
    CHECK(out.width() == 400);
    CHECK(out.height() == 200);
    double mn, mx;
    cv::minMaxLoc(out.pixels, &mn, &mx);
    CHECK(mn == 0);
    CHECK(mx == 255);
    CHECK(out.provenance.size() == 2);
  }
  SECTION("tool failure aborts the plan, keeping the last good image") {
    ToolkitConfig tiny;
    tiny.pixel_budget = 1000;  // any upscale overflows
    ToolPlan plan{{ToolId::Binarize, ToolId::Upscale}, ToolPlan::Origin::Manual};
    TableImage out = execute_plan(img, plan, tiny);
    CHECK(out.width() == 200);  // upscale never applied
    REQUIRE(out.provenance.size() == 2);
    CHECK(out.provenance[1].find("aborted") != std::string::npos);
  }
}

TEST_CASE("generate_plans renders the plan prompt and sanitizes the reply") {
  NeighborRecord rec = neighbor_record();
  TableImage nimg = neighbor_image();

  SECTION("three valid plans arrive in generation order") {
    Harness h([](const VisionRequest& req) {
      CHECK(req.template_id == "PlanGeneration");
      CHECK(req.sampling.temperature == 0.8);
      CHECK(req.images.size() == 1);
      CHECK(req.user_text.find("clean scan, thin borders") != std::string::npos);
      CHECK(req.user_text.find("BorderEnhance") != std::string::npos);
      return std::string(R"([["Upscale","Binarize"],["NoiseReduce"],["DetectCrop"]])");
    });
    auto session = h.session();
    auto plans = generate_plans(session, rec, nimg, default_tool_descriptors());
    REQUIRE(plans.size() == 3);
    CHECK(plans[0].steps == std::vector<ToolId>{ToolId::Upscale, ToolId::Binarize});
    CHECK(plans[2].steps == std::vector<ToolId>{ToolId::DetectCrop});
  }
  SECTION("garbage reply falls back to the empty plan") {
    Harness h([](const VisionRequest&) { return std::string("no tools needed, all good"); });
    auto session = h.session();
    auto plans = generate_plans(session, rec, nimg, default_tool_descriptors());
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].empty());
  }
  SECTION("N=1 keeps only the first plan") {
    Harness h([](const VisionRequest&) {
      return std::string(R"([["Upscale"],["Binarize"],["NoiseReduce"],["DetectCrop"]])");
    });
    h.cfg.plans_per_generation = 1;
    auto session = h.session();
    auto plans = generate_plans(session, rec, nimg, default_tool_descriptors());
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].steps == std::vector<ToolId>{ToolId::Upscale});
  }
}

TEST_CASE("learn_experience scores plans on the neighbor and takes the argmax") {
  NeighborRecord rec = neighbor_record();
  TableImage nimg = neighbor_image();
  std::vector<ToolPlan> plans = {
      ToolPlan{{ToolId::Binarize}, ToolPlan::Origin::ModelGenerated},
      ToolPlan{{ToolId::Upscale}, ToolPlan::Origin::ModelGenerated},
      ToolPlan{{ToolId::NoiseReduce}, ToolPlan::Origin::ModelGenerated},
  };

  SECTION("the plan whose recognition matches gold wins with TEDS 1.0") {
    // key responses by the processed image digest; plan B (Upscale) gets gold
    std::string upscale_digest = pixel_digest(execute_plan(nimg, plans[1]));
    Harness h([upscale_digest](const VisionRequest& req) {
      if (req.images[0].digest == upscale_digest) return kGoldA;
      return kGoldAOneOff;
    });
    auto session = h.session();
    ExperienceResult result = learn_experience(session, plans, rec, nimg);
    CHECK(result.chosen == plans[1]);
    REQUIRE(result.scoreboard.size() == 3);
    CHECK(result.scoreboard[1].neighbor_teds == 1.0);
    CHECK(result.scoreboard[0].neighbor_teds < 1.0);
    CHECK_FALSE(result.all_zero);
  }
  SECTION("all plans scoring zero selects the first by generation order") {
    Harness h([](const VisionRequest&) { return std::string("nothing to see"); });
    auto session = h.session();
    ExperienceResult result = learn_experience(session, plans, rec, nimg);
    CHECK(result.chosen == plans[0]);
    CHECK(result.all_zero);
    for (const auto& row : result.scoreboard) CHECK(row.neighbor_teds == 0.0);
  }
  SECTION("chosen plan equals an independent argmax over the scoreboard") {
    std::string binarize_digest = pixel_digest(execute_plan(nimg, plans[0]));
    Harness h([binarize_digest](const VisionRequest& req) -> std::string {
      if (req.images[0].digest == binarize_digest) return kGoldAOneOff;
      return "prose only";
    });
    auto session = h.session();
    ExperienceResult result = learn_experience(session, plans, rec, nimg);
    double best = -1.0;
    size_t best_idx = 0;
    for (size_t i = 0; i < result.scoreboard.size(); ++i) {
      if (result.scoreboard[i].neighbor_teds > best) {
        best = result.scoreboard[i].neighbor_teds;
        best_idx = i;
      }
    }
    CHECK(result.chosen == result.scoreboard[best_idx].plan);
    CHECK(result.chosen == plans[0]);
  }
}

TEST_CASE("reflective_execute gates each step on the verdict") {
  TableImage img = imgfix::grid(240, 160);
  ToolPlan plan{{ToolId::Upscale, ToolId::Binarize, ToolId::NoiseReduce},
                ToolPlan::Origin::Manual};

  SECTION("rejecting every step returns the input unchanged") {
    Harness h([](const VisionRequest&) { return std::string("IMAGE_1"); });
    auto session = h.session();
    ReflectiveResult result = reflective_execute(session, img, plan);
    CHECK(pixels_identical(result.image, img));
    REQUIRE(result.verdicts.size() == 3);
    for (const auto& v : result.verdicts) CHECK(v.gamma == 0);
    CHECK(result.applied.empty());
  }
  SECTION("accepting every step equals execute_plan") {
    Harness h([](const VisionRequest&) { return std::string("IMAGE_2"); });
    auto session = h.session();
    ReflectiveResult result = reflective_execute(session, img, plan);
    TableImage direct = execute_plan(img, plan);
    CHECK(pixel_digest(result.image) == pixel_digest(direct));
    CHECK(result.applied.size() == 3);
  }
  SECTION("accepting only step 2 of 3 applies just that tool") {
    auto call_index = std::make_shared<int>(0);
    Harness h([call_index](const VisionRequest&) {
      return std::string((*call_index)++ == 1 ? "IMAGE_2" : "IMAGE_1");
    });
    auto session = h.session();
    ReflectiveResult result = reflective_execute(session, img, plan);
    TableImage expected = apply_tool(ToolId::Binarize, img);
    CHECK(pixel_digest(result.image) == pixel_digest(expected));
    CHECK(result.applied == std::vector<ToolId>{ToolId::Binarize});
  }
  SECTION("gateway error at a step rejects that step and continues") {
    auto call_index = std::make_shared<int>(0);
    Harness h([call_index](const VisionRequest&) -> std::string {
      if ((*call_index)++ == 0) throw TransportError("flaky");
      return "IMAGE_2";
    });
    auto session = h.session();
    ReflectiveResult result = reflective_execute(session, img, plan);
    REQUIRE(result.verdicts.size() == 3);
    CHECK(result.verdicts[0].gamma == 0);
    CHECK(result.verdicts[1].gamma == 1);
    CHECK(result.applied.size() == 2);
  }
  SECTION("reflection disabled auto-accepts without model calls") {
    Harness h([](const VisionRequest&) -> std::string {
      throw std::logic_error("no call expected");
    });
    h.cfg.reflection_enabled = false;
    auto session = h.session();
    ReflectiveResult result = reflective_execute(session, img, plan);
    CHECK(h.client->call_count() == 0);
    CHECK(result.applied.size() == 3);
    CHECK(pixel_digest(result.image) == pixel_digest(execute_plan(img, plan)));
  }
}

TEST_CASE("recognize normalizes model markup") {
  TableImage img = imgfix::grid();
  SECTION("fixture table comes back normalized") {
    Harness h([](const VisionRequest&) {
      return std::string("```html\n<table><tr><td colspan=\"2\">a</tr></table>\n```");
    });
    auto session = h.session();
    RecognitionResult rec = recognize(session, img);
    CHECK_FALSE(rec.no_table);
    CHECK(rec.markup == "<table><tr><td rowspan=1 colspan=2>a</td></tr></table>");
  }
  SECTION("prose yields empty markup with a note") {
    Harness h([](const VisionRequest&) { return std::string("I see no table here."); });
    auto session = h.session();
    RecognitionResult rec = recognize(session, img);
    CHECK(rec.no_table);
    CHECK(rec.markup.empty());
  }
  SECTION("same image and script produce identical markup") {
    auto fn = [](const VisionRequest&) { return kGoldA; };
    Harness h1(fn), h2(fn);
    auto s1 = h1.session(), s2 = h2.session();
    CHECK(recognize(s1, img).markup == recognize(s2, img).markup);
  }
}

TEST_CASE("session budget caps model calls per sample") {
  Harness h([](const VisionRequest&) { return std::string("x"); });
  h.cfg.max_plan_len = 1;
  h.cfg.plans_per_generation = 1;  // budget = 1 + 1 + 2 = 4
  auto session = h.session();
  VisionRequest req;
  TableImage img = imgfix::grid(64, 64);
  req.images.push_back(make_payload(img));
  req.template_id = "RecognizeSimple";
  for (int i = 0; i < 4; ++i) CHECK_NOTHROW(session.call(req));
  CHECK_THROWS_AS(session.call(req), BudgetError);

  SECTION("explicit budget override wins over the derived cap") {
    h.cfg.budget_override = 2;
    auto tight = h.session();
    CHECK_NOTHROW(tight.call(req));
    CHECK_NOTHROW(tight.call(req));
    CHECK_THROWS_AS(tight.call(req), BudgetError);
  }
}

namespace {

// end-to-end policy: plan prompt -> three plans; reflection -> accept;
// recognition -> gold for the winning plan's image, a one-off otherwise
struct PolicyState {
  std::string winner_digest;
  std::string test_final_digest;
};

CallbackClient::Fn make_policy(const PolicyState& state) {
  return [state](const VisionRequest& req) -> std::string {
    if (req.template_id == "PlanGeneration")
      return R"([["Upscale"],["Binarize"],["NoiseReduce"]])";
    if (req.template_id == "Reflection") return "IMAGE_2";
    if (req.images[0].digest == state.winner_digest) return kGoldA;
    if (req.images[0].digest == state.test_final_digest) return kGoldA;
    return kGoldAOneOff;
  };
}

}  // namespace

TEST_CASE("run_sample chains the full flow") {
  TableImage nimg = neighbor_image();
  NeighborRecord rec = neighbor_record();
  NeighborStore store;
  store.records.push_back(rec);
  auto loader = [&](const NeighborRecord&) { return nimg; };

  // test image: degraded copy of the neighbor
  TableImage test = degrade(nimg, Scenario::Blur, 7);
  test.id = "sample-0";
  test.provenance.clear();

  PolicyState state;
  state.winner_digest =
      pixel_digest(execute_plan(nimg, ToolPlan{{ToolId::Binarize}, ToolPlan::Origin::Manual}));
  state.test_final_digest =
      pixel_digest(execute_plan(test, ToolPlan{{ToolId::Binarize}, ToolPlan::Origin::Manual}));

  SECTION("full pipeline report") {
    Harness h(make_policy(state));
    RunReport report = run_sample(test, kGoldA, store, loader, h.gateway, h.prompts,
                                  default_tool_descriptors(), h.cfg);
    INFO(report.error_stage << ": " << report.error_message);
    REQUIRE(report.ok);
    CHECK(report.neighbor_id == "neighbor-0");
    CHECK(report.chosen_plan.steps == std::vector<ToolId>{ToolId::Binarize});
    CHECK(report.teds == 1.0);
    CHECK(report.teds_struct == 1.0);
    REQUIRE(report.scoreboard.size() == 3);
    CHECK(report.scoreboard[1].neighbor_teds == 1.0);
    CHECK(report.verdicts.size() == 1);
    CHECK(report.calls.size() == static_cast<size_t>(1 + 3 + 1 + 1));
  }
  SECTION("disabling experience uses the first generated plan") {
    Harness h(make_policy(state));
    h.cfg.experience_enabled = false;
    RunReport report = run_sample(test, kGoldA, store, loader, h.gateway, h.prompts,
                                  default_tool_descriptors(), h.cfg);
    REQUIRE(report.ok);
    CHECK(report.chosen_plan.steps == std::vector<ToolId>{ToolId::Upscale});
    CHECK(report.scoreboard.empty());
    CHECK(h.client->calls_for_template("RecognizeSimple") == 1);  // final only
  }
  SECTION("disabling reflection issues no reflection calls") {
    Harness h(make_policy(state));
    h.cfg.reflection_enabled = false;
    RunReport report = run_sample(test, kGoldA, store, loader, h.gateway, h.prompts,
                                  default_tool_descriptors(), h.cfg);
    REQUIRE(report.ok);
    CHECK(h.client->calls_for_template("Reflection") == 0);
    CHECK(report.applied_tools == report.chosen_plan.steps);
  }
  SECTION("empty store produces an error report, not a crash") {
    Harness h(make_policy(state));
    NeighborStore empty;
    RunReport report = run_sample(test, kGoldA, empty, loader, h.gateway, h.prompts,
                                  default_tool_descriptors(), h.cfg);
    CHECK_FALSE(report.ok);
    CHECK(report.error_stage == "retrieve");
  }
  SECTION("reports are deterministic for a fixed policy") {
    Harness h1(make_policy(state)), h2(make_policy(state));
    RunReport r1 = run_sample(test, kGoldA, store, loader, h1.gateway, h1.prompts,
                              default_tool_descriptors(), h1.cfg);
    RunReport r2 = run_sample(test, kGoldA, store, loader, h2.gateway, h2.prompts,
                              default_tool_descriptors(), h2.cfg);
    CHECK(r1.to_json().dump() == r2.to_json().dump());
  }
}

TEST_CASE("run_batch aggregates reports in corpus order") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "ngtr_batch_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "images");

  TableImage nimg = neighbor_image();
  fs::path neighbor_path = dir / "images" / "n0.png";
  save_png(nimg, neighbor_path.string());
  std::vector<StoreSource> sources = {
      StoreSource{"neighbor-0", neighbor_path, kGoldA, "clean"}};
  fs::path store_dir = dir / "store";
  NeighborStore store = build_store(sources, store_dir);
  save_store(store, store_dir);

  std::vector<CorpusSample> samples;
  for (int i = 0; i < 3; ++i) {
    TableImage test = degrade(nimg, Scenario::Blur, static_cast<uint64_t>(i));
    fs::path p = dir / "images" / ("t" + std::to_string(i) + ".png");
    save_png(test, p.string());
    samples.push_back(CorpusSample{"t" + std::to_string(i), p, kGoldA});
  }
  // one unreadable sample: continues as an error report
  samples.push_back(CorpusSample{"broken", dir / "images" / "missing.png", kGoldA});

  Harness h([](const VisionRequest& req) -> std::string {
    if (req.template_id == "PlanGeneration") return R"([["Binarize"]])";
    if (req.template_id == "Reflection") return "IMAGE_2";
    return kGoldA;
  });
  BatchOptions options;
  options.workers = 3;
  options.store_dir = store_dir;
  BatchResult result = run_batch(samples, store, h.gateway, h.prompts,
                                 default_tool_descriptors(), h.cfg, options);
  REQUIRE(result.reports.size() == 4);
  CHECK(result.reports[0].id == "t0");
  CHECK(result.reports[3].id == "broken");
  CHECK_FALSE(result.reports[3].ok);
  CHECK(result.n_ok == 3);
  CHECK(result.n_scored == 3);
  CHECK(result.mean_teds == 1.0);
  CHECK(result.samples_with_tools == 3);
  CHECK(result.tool_usage_rates.at(ToolId::Binarize) == 1.0);
  CHECK(result.tool_usage_rates.at(ToolId::Upscale) == 0.0);

  write_batch_outputs(result, store, dir / "out");
  CHECK(fs::exists(dir / "out" / "reports.jsonl"));
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "timing.jsonl"));
  fs::remove_all(dir);
}
