#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ngtr/gateway.hpp"
#include "ngtr/prompts.hpp"
#include "ngtr/response_parse.hpp"
#include "support/image_fixtures.hpp"

using namespace ngtr;

namespace {

std::map<std::string, std::string> full_bindings() {
  return {
      {"tool_descriptions", describe_tools(default_tool_descriptors())},
      {"neighbor_traits", "low resolution, faint borders"},
      {"row_index", "2"},
      {"col_index", "1"},
      {"cell_content", "Total"},
      {"cell_location", "row 1, column 2"},
      {"L", "4"},
      {"N", "3"},
  };
}

VisionRequest simple_request(const std::string& fingerprint = "fp-1") {
  VisionRequest req;
  req.template_id = "RecognizeSimple";
  req.user_text = "recognize";
  req.fingerprint = fingerprint;
  TableImage img = imgfix::grid();
  req.images.push_back(make_payload(img));
  return req;
}

RetryPolicy fast_retry(int max_retries) {
  RetryPolicy p;
  p.max_retries = max_retries;
  p.backoff_ms = 0;
  return p;
}

}  // namespace

TEST_CASE("prompt templates render without residue") {
  PromptRegistry reg = PromptRegistry::builtin();
  auto bindings = full_bindings();
  for (PromptId id : all_prompts()) {
    INFO(to_string(id));
    std::string text = reg.render(id, bindings);
    CHECK(text.find('{') == std::string::npos);
    CHECK_FALSE(text.empty());
  }
}

TEST_CASE("rendering fails on unbound placeholders") {
  PromptRegistry reg = PromptRegistry::builtin();
  CHECK_THROWS_AS(reg.render(PromptId::PlanGeneration, {}), TemplateError);
  CHECK_THROWS_AS(reg.render(PromptId::Ccr, {{"row_index", "1"}}), TemplateError);
  // templates without placeholders render with empty bindings
  CHECK_NOTHROW(reg.render(PromptId::RecognizeSimple, {}));
}

TEST_CASE("prompt dir overlay replaces bodies") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "ngtr_prompts_test";
  fs::remove_all(dir);
  PromptRegistry::builtin().dump_dir(dir);
  {
    std::ofstream out(dir / "RecognizeSimple.txt");
    out << "custom body\n";
  }
  PromptRegistry reg = PromptRegistry::load_dir(dir);
  CHECK(reg.body(PromptId::RecognizeSimple) == "custom body\n");
  CHECK(reg.body(PromptId::Reflection) == PromptRegistry::builtin().body(PromptId::Reflection));
  fs::remove_all(dir);
}

TEST_CASE("request fingerprints are stable and distinguish inputs") {
  PromptRegistry reg = PromptRegistry::builtin();
  TableImage img = imgfix::grid();
  TableImage other = imgfix::text_only();
  auto bindings = full_bindings();
  VisionRequest a = reg.build_request(PromptId::PlanGeneration, bindings, {&img}, {});
  VisionRequest b = reg.build_request(PromptId::PlanGeneration, bindings, {&img}, {});
  CHECK(a.fingerprint == b.fingerprint);
  VisionRequest c = reg.build_request(PromptId::PlanGeneration, bindings, {&other}, {});
  CHECK(a.fingerprint != c.fingerprint);
  auto bindings2 = bindings;
  bindings2["N"] = "5";
  VisionRequest d = reg.build_request(PromptId::PlanGeneration, bindings2, {&img}, {});
  CHECK(a.fingerprint != d.fingerprint);
}

TEST_CASE("gateway completes against the scripted mock") {
  SECTION("fixed reply arrives with zero retries") {
    auto mock = std::make_shared<ScriptedMock>();
    mock->add("fp-1", "hello");
    Gateway gw(mock, fast_retry(3));
    Completion c = gw.complete(simple_request());
    CHECK(c.text == "hello");
    CHECK(c.meta.retries == 0);
  }
  SECTION("fail twice then succeed records two retries") {
    auto mock = std::make_shared<ScriptedMock>();
    mock->add("fp-1", "ok", /*fail_times=*/2);
    Gateway gw(mock, fast_retry(3));
    Completion c = gw.complete(simple_request());
    CHECK(c.text == "ok");
    CHECK(c.meta.retries == 2);
    CHECK(c.meta.attempts == 3);
  }
  SECTION("always failing exhausts retries after max_retries+1 attempts") {
    auto mock = std::make_shared<ScriptedMock>();
    mock->add("fp-1", "never", /*fail_times=*/100);
    Gateway gw(mock, fast_retry(2));
    CHECK_THROWS_AS(gw.complete(simple_request()), TransportError);
    CHECK(mock->calls().size() == 3);
  }
  SECTION("auth errors are not retried") {
    auto client = std::make_shared<CallbackClient>(
        [](const VisionRequest&) -> std::string { throw AuthError("denied"); });
    Gateway gw(client, fast_retry(5));
    CHECK_THROWS_AS(gw.complete(simple_request()), AuthError);
    CHECK(client->call_count() == 1);
  }
  SECTION("mock misses are not retried") {
    auto mock = std::make_shared<ScriptedMock>();
    Gateway gw(mock, fast_retry(5));
    CHECK_THROWS_AS(gw.complete(simple_request()), MockMissError);
    CHECK(mock->calls().size() == 1);
  }
  SECTION("default entry answers any fingerprint") {
    auto mock = std::make_shared<ScriptedMock>();
    mock->set_default("fallback");
    Gateway gw(mock, fast_retry(0));
    CHECK(gw.complete(simple_request("whatever")).text == "fallback");
  }
  SECTION("image count enforced") {
    auto mock = std::make_shared<ScriptedMock>();
    mock->set_default("x");
    Gateway gw(mock, fast_retry(0));
    VisionRequest none;
    CHECK_THROWS_AS(gw.complete(none), std::invalid_argument);
    VisionRequest three = simple_request();
    three.images.push_back(three.images[0]);
    three.images.push_back(three.images[0]);
    CHECK_THROWS_AS(gw.complete(three), std::invalid_argument);
  }
}

TEST_CASE("mock scripts round-trip through jsonl") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "ngtr_mock_test.jsonl";
  auto mock = std::make_shared<ScriptedMock>();
  mock->add("aa", "first");
  mock->add("bb", "second", 1);
  mock->to_jsonl(path.string());
  auto loaded = ScriptedMock::from_jsonl(path.string());
  Gateway gw(loaded, fast_retry(2));
  CHECK(gw.complete(simple_request("aa")).text == "first");
  Completion c = gw.complete(simple_request("bb"));
  CHECK(c.text == "second");
  CHECK(c.meta.retries == 1);
  fs::remove(path);
}

TEST_CASE("parse_markup_response extracts the table span") {
  CHECK(parse_markup_response("```html\n<table><tr><td>a</td></tr></table>\n```") ==
        "<table><tr><td>a</td></tr></table>");
  CHECK(parse_markup_response(
            "Here is the table: <table><tr><td>a</td></tr></table> Hope this helps.") ==
        "<table><tr><td>a</td></tr></table>");
  CHECK_THROWS_AS(parse_markup_response("I cannot see a table."), NoTableError);
  SECTION("missing closing tag keeps the tail for lenient repair") {
    std::string got = parse_markup_response("<table><tr><td>a");
    CHECK(got.substr(0, 6) == "<table");
  }
}

TEST_CASE("parse_plans_response sanitizes model plans") {
  std::set<ToolId> known(all_tools().begin(), all_tools().end());

  SECTION("JSON list of three plans") {
    auto plans = parse_plans_response(
        R"([["Upscale","Binarize"],["NoiseReduce"],["BorderEnhance","DetectCrop"]])", 4, 3, known);
    REQUIRE(plans.size() == 3);
    CHECK(plans[0].steps == std::vector<ToolId>{ToolId::Upscale, ToolId::Binarize});
    CHECK(plans[1].steps == std::vector<ToolId>{ToolId::NoiseReduce});
    CHECK(plans[0].origin == ToolPlan::Origin::ModelGenerated);
  }
  SECTION("unknown tool dropped, remainder kept") {
    auto plans = parse_plans_response(R"([["Upscale","MagicTool","Binarize"]])", 4, 3, known);
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].steps == std::vector<ToolId>{ToolId::Upscale, ToolId::Binarize});
  }
  SECTION("five long plans truncate to N=3 plans of length <= 4") {
    std::string raw =
        R"([["Upscale","Binarize","Upscale","Binarize","Upscale","Binarize"],)"
        R"(["NoiseReduce","Upscale","NoiseReduce","Upscale","NoiseReduce","Upscale"],)"
        R"(["BorderEnhance","DetectCrop","BorderEnhance","DetectCrop","BorderEnhance","DetectCrop"],)"
        R"(["Binarize","NoiseReduce","Binarize","NoiseReduce","Binarize","NoiseReduce"],)"
        R"(["DetectCrop","Upscale","DetectCrop","Upscale","DetectCrop","Upscale"]])";
    auto plans = parse_plans_response(raw, 4, 3, known);
    REQUIRE(plans.size() == 3);
    for (const auto& p : plans) CHECK(p.size() <= 4);
  }
  SECTION("garbage yields the empty plan floor") {
    auto plans = parse_plans_response("I would recommend consulting a specialist.", 4, 3, known);
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].empty());
    CHECK(plans[0].origin == ToolPlan::Origin::Empty);
  }
  SECTION("consecutive duplicates collapse") {
    auto plans = parse_plans_response(R"([["Binarize","Binarize","Upscale"]])", 4, 3, known);
    CHECK(plans[0].steps == std::vector<ToolId>{ToolId::Binarize, ToolId::Upscale});
  }
  SECTION("identical plans deduplicate") {
    auto plans = parse_plans_response(R"([["Upscale"],["Upscale"],["Binarize"]])", 4, 3, known);
    REQUIRE(plans.size() == 2);
  }
  SECTION("line-based fallback with descriptive names") {
    auto plans = parse_plans_response(
        "1. Image Upscaling, Binarization\n2. Noise Reduction\n", 4, 3, known);
    REQUIRE(plans.size() == 2);
    CHECK(plans[0].steps == std::vector<ToolId>{ToolId::Upscale, ToolId::Binarize});
    CHECK(plans[1].steps == std::vector<ToolId>{ToolId::NoiseReduce});
  }
}

TEST_CASE("parse_plans_response output bounds hold on arbitrary input") {
  std::set<ToolId> known(all_tools().begin(), all_tools().end());
  static const char* fragments[] = {
      "[[\"Upscale\"],", "\"Binarize\"", "]]", "[", "]", "Upscale,", "MagicTool",
      "1. Noise Reduction\n", "{", "plan:", "Upscale>Upscale>Upscale>Upscale>Upscale",
      "\n", "DetectCrop|BorderEnhance", "null", "42",
  };
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<size_t> pick(0, std::size(fragments) - 1);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 300; ++trial) {
    std::string raw;
    int n = len(rng);
    for (int i = 0; i < n; ++i) raw += fragments[pick(rng)];
    auto plans = parse_plans_response(raw, 4, 3, known);
    REQUIRE(plans.size() >= 1);
    REQUIRE(plans.size() <= 3);
    for (const auto& plan : plans) {
      REQUIRE(plan.size() <= 4);
      for (size_t i = 0; i < plan.steps.size(); ++i) {
        REQUIRE(known.count(plan.steps[i]) == 1);
        if (i) REQUIRE(plan.steps[i] != plan.steps[i - 1]);
      }
    }
  }
}

TEST_CASE("parse_reflection_response maps the binary verdict") {
  CHECK(parse_reflection_response("IMAGE_2").gamma == 1);
  CHECK(parse_reflection_response("IMAGE_1").gamma == 0);
  CHECK(parse_reflection_response("image_2 looks better").gamma == 1);
  ReflectionChoice ambiguous = parse_reflection_response("both look fine");
  CHECK(ambiguous.gamma == 0);
  CHECK(ambiguous.parse_warning);
  ReflectionChoice contradictory = parse_reflection_response("IMAGE_1 or IMAGE_2");
  CHECK(contradictory.gamma == 0);
  CHECK(contradictory.parse_warning);
}
