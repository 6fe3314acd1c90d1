#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngtr/gateway.hpp"
#include "ngtr/markup.hpp"
#include "ngtr/plan.hpp"
#include "ngtr/prompts.hpp"
#include "ngtr/response_parse.hpp"
#include "ngtr/store.hpp"
#include "ngtr/teds.hpp"
#include "ngtr/toolkit.hpp"

namespace ngtr {

struct PipelineConfig {
  int max_plan_len = 4;        // toolchain length cap
  int plans_per_generation = 3;
  double plan_temperature = 0.8;
  double recognition_temperature = 0.0;
  double top_p = 0.2;
  int n_samples = 1;
  bool reflection_enabled = true;
  bool experience_enabled = true;
  bool use_cot = false;
  int budget_override = 0;  // 0 = derived cap below
  ToolkitConfig toolkit;
  FeatureParams features;

  // hard cap on model calls per sample: plan generation + final
  // recognition + one recognition per candidate + one reflection per step
  int call_budget() const {
    return budget_override > 0 ? budget_override : plans_per_generation + max_plan_len + 2;
  }

  SamplingParams plan_sampling() const { return {plan_temperature, top_p, n_samples}; }
  SamplingParams recognition_sampling() const { return {recognition_temperature, top_p, n_samples}; }
};

struct ReflectionVerdict {
  int step_index = 0;
  int gamma = 0;
  std::string raw_digest;
};

struct PlanOutcome {
  ToolPlan plan;
  double neighbor_teds = 0.0;
  std::string note;
};

struct CallDigest {
  std::string template_id;
  std::string fingerprint;
  std::string response_digest;
};

/// Per-sample record of everything the pipeline did. Timing lives here but
/// is serialized to a sidecar, not into reports.jsonl, so report files stay
/// byte-reproducible.
struct RunReport {
  std::string id;
  bool ok = false;
  std::string error_stage;
  std::string error_message;
  std::string neighbor_id;
  double neighbor_similarity = 0.0;
  std::vector<PlanOutcome> scoreboard;
  ToolPlan chosen_plan;
  bool chosen_plan_scored_zero = false;
  std::vector<ReflectionVerdict> verdicts;
  std::vector<ToolId> applied_tools;
  std::string final_markup;
  double teds = -1.0;         // -1 when no gold available
  double teds_struct = -1.0;
  std::vector<CallDigest> calls;
  long timing_ms = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["ok"] = ok;
    if (!ok) {
      j["error_stage"] = error_stage;
      j["error_message"] = error_message;
    }
    j["neighbor"] = {{"id", neighbor_id}, {"similarity", neighbor_similarity}};
    nlohmann::json board = nlohmann::json::array();
    for (const auto& row : scoreboard) {
      nlohmann::json r = {{"plan", row.plan.to_string()}, {"teds", row.neighbor_teds}};
      if (!row.note.empty()) r["note"] = row.note;
      board.push_back(r);
    }
    j["scoreboard"] = board;
    j["chosen_plan"] = chosen_plan.to_string();
    j["chosen_plan_scored_zero"] = chosen_plan_scored_zero;
    nlohmann::json verdict_list = nlohmann::json::array();
    for (const auto& v : verdicts)
      verdict_list.push_back(
          {{"step", v.step_index}, {"gamma", v.gamma}, {"digest", v.raw_digest}});
    j["verdicts"] = verdict_list;
    nlohmann::json applied = nlohmann::json::array();
    for (ToolId t : applied_tools) applied.push_back(ngtr::to_string(t));
    j["applied_tools"] = applied;
    j["final_markup"] = final_markup;
    if (teds >= 0) j["teds"] = teds;
    if (teds_struct >= 0) j["teds_struct"] = teds_struct;
    nlohmann::json call_list = nlohmann::json::array();
    for (const auto& c : calls)
      call_list.push_back({{"template", c.template_id},
                           {"fingerprint", c.fingerprint},
                           {"response_digest", c.response_digest}});
    j["calls"] = call_list;
    return j;
  }
};

/// Per-sample call context: owns the budget counter and the call digests.
struct PipelineSession {
  PipelineSession(Gateway& gw, const PromptRegistry& registry, const PipelineConfig& config)
      : gateway(gw), prompts(registry), cfg(config) {}

  Gateway& gateway;
  const PromptRegistry& prompts;
  const PipelineConfig& cfg;
  int calls_used = 0;
  std::vector<CallDigest> call_digests;

  Completion call(const VisionRequest& request) {
    if (calls_used >= cfg.call_budget())
      throw BudgetError("per-sample model call budget (" + std::to_string(cfg.call_budget()) +
                        ") exhausted");
    ++calls_used;
    Completion c = gateway.complete(request);
    call_digests.push_back(CallDigest{request.template_id, request.fingerprint, digest_hex(c.text)});
    return c;
  }
};

/// Plan generation: tool descriptions plus the retrieved neighbor (image
/// and traits) are shown to the model at the plan temperature; the reply
/// is sanitized into at most N plans with the empty plan as the floor.
inline std::vector<ToolPlan> generate_plans(PipelineSession& session,
                                            const NeighborRecord& neighbor,
                                            const TableImage& neighbor_image,
                                            const std::vector<ToolDescriptor>& tools) {
  std::map<std::string, std::string> bindings = {
      {"tool_descriptions", describe_tools(tools)},
      {"neighbor_traits", neighbor.traits.empty() ? "(none recorded)" : neighbor.traits},
      {"L", std::to_string(session.cfg.max_plan_len)},
      {"N", std::to_string(session.cfg.plans_per_generation)},
  };
  VisionRequest req = session.prompts.build_request(PromptId::PlanGeneration, bindings,
                                                    {&neighbor_image},
                                                    session.cfg.plan_sampling());
  Completion c = session.call(req);
  std::set<ToolId> known;
  for (const auto& t : tools) known.insert(t.id);
  return parse_plans_response(c.text, session.cfg.max_plan_len,
                              session.cfg.plans_per_generation, known);
}

/// Applies the plan's tools in order. A failing tool aborts the plan and
/// returns the last good image with an abort note in its provenance.
inline TableImage execute_plan(const TableImage& img, const ToolPlan& plan,
                               const ToolkitConfig& toolkit = {}) {
  TableImage current = img;
  current.pixels = img.pixels.clone();
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    try {
      current = apply_tool(plan.steps[i], current, toolkit);
    } catch (const Error& e) {
      current.provenance.push_back("plan aborted at step " + std::to_string(i) + " (" +
                                   ngtr::to_string(plan.steps[i]) + "): " + e.what());
      break;
    } catch (const std::invalid_argument& e) {
      current.provenance.push_back("plan aborted at step " + std::to_string(i) + " (" +
                                   ngtr::to_string(plan.steps[i]) + "): " + e.what());
      break;
    }
  }
  return current;
}

struct RecognitionResult {
  std::string markup;  // normalized serialization; empty when no table found
  bool no_table = false;
  std::string note;
};

/// Single recognition call at temperature 0; the markup span is extracted
/// and normalized through the lenient parser. A response without a table
/// yields an empty markup with a note instead of an error.
inline RecognitionResult recognize(PipelineSession& session, const TableImage& img) {
  PromptId id = session.cfg.use_cot ? PromptId::RecognizeCoT : PromptId::RecognizeSimple;
  VisionRequest req =
      session.prompts.build_request(id, {}, {&img}, session.cfg.recognition_sampling());
  Completion c = session.call(req);
  RecognitionResult out;
  try {
    std::string span = parse_markup_response(c.text);
    out.markup = serialize_markup(parse_markup(span, ParseMode::Lenient));
  } catch (const NoTableError& e) {
    out.no_table = true;
    out.note = e.what();
  } catch (const EmptyError& e) {
    out.no_table = true;
    out.note = e.what();
  }
  return out;
}

struct ExperienceResult {
  ToolPlan chosen;
  std::vector<PlanOutcome> scoreboard;
  bool all_zero = false;
};

/// Tool-invocation experience learning: every candidate plan runs on the
/// labeled neighbor image, recognition output is scored with TEDS against
/// the neighbor's gold markup, and the argmax plan wins (ties go to
/// generation order).
inline ExperienceResult learn_experience(PipelineSession& session,
                                         const std::vector<ToolPlan>& plans,
                                         const NeighborRecord& neighbor,
                                         const TableImage& neighbor_image) {
  MarkupTree gold = parse_markup(neighbor.gold_markup, ParseMode::Lenient);
  ExperienceResult result;
  for (const auto& plan : plans) {
    PlanOutcome outcome;
    outcome.plan = plan;
    TableImage processed = execute_plan(neighbor_image, plan, session.cfg.toolkit);
    RecognitionResult rec = recognize(session, processed);
    if (rec.no_table || rec.markup.empty()) {
      outcome.neighbor_teds = 0.0;
      outcome.note = rec.note.empty() ? "no table in response" : rec.note;
    } else {
      outcome.neighbor_teds = teds(rec.markup, neighbor.gold_markup).value;
    }
    result.scoreboard.push_back(std::move(outcome));
  }
  size_t best = 0;
  for (size_t i = 1; i < result.scoreboard.size(); ++i)
    if (result.scoreboard[i].neighbor_teds > result.scoreboard[best].neighbor_teds) best = i;
  result.chosen = result.scoreboard[best].plan;
  result.all_zero = result.scoreboard[best].neighbor_teds == 0.0;
  return result;
}

struct ReflectiveResult {
  TableImage image;
  std::vector<ReflectionVerdict> verdicts;
  std::vector<ToolId> applied;
};

/// Reflection-gated execution on the test image: each step's candidate
/// output is accepted only when the model judges the post-operation image
/// better (gamma=1); rejected steps keep the prior image and the plan
/// continues. Gateway failures at a step reject that step. With
/// reflection disabled every step auto-accepts and no model calls happen.
inline ReflectiveResult reflective_execute(PipelineSession& session, const TableImage& img,
                                           const ToolPlan& plan) {
  ReflectiveResult result;
  result.image = img;
  result.image.pixels = img.pixels.clone();
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    ReflectionVerdict verdict;
    verdict.step_index = static_cast<int>(i);
    TableImage candidate;
    bool tool_ok = true;
    try {
      candidate = apply_tool(plan.steps[i], result.image, session.cfg.toolkit);
    } catch (const Error& e) {
      tool_ok = false;
      verdict.raw_digest = std::string("tool-error:") + e.what();
    } catch (const std::invalid_argument& e) {
      tool_ok = false;
      verdict.raw_digest = std::string("tool-error:") + e.what();
    }
    if (!tool_ok) {
      verdict.gamma = 0;
      result.verdicts.push_back(std::move(verdict));
      continue;
    }
    if (!session.cfg.reflection_enabled) {
      verdict.gamma = 1;
      verdict.raw_digest = "auto-accept";
    } else {
      VisionRequest req = session.prompts.build_request(
          PromptId::Reflection, {}, {&result.image, &candidate},
          session.cfg.recognition_sampling());
      try {
        Completion c = session.call(req);
        ReflectionChoice choice = parse_reflection_response(c.text);
        verdict.gamma = choice.gamma;
        verdict.raw_digest = digest_hex(c.text) + (choice.parse_warning ? ":warn" : "");
      } catch (const BudgetError&) {
        throw;
      } catch (const Error& e) {
        verdict.gamma = 0;
        verdict.raw_digest = std::string("gateway-error:") + e.what();
      }
    }
    if (verdict.gamma == 1) {
      result.applied.push_back(plan.steps[i]);
      result.image = std::move(candidate);
    }
    result.verdicts.push_back(std::move(verdict));
  }
  return result;
}

/// Full per-sample flow: retrieve neighbor, generate plans, learn the best
/// plan on the neighbor, execute it on the test image under reflection,
/// recognize, score against gold when available. Never throws: failures
/// come back as an error report so batches keep going.
inline RunReport run_sample(const TableImage& test, const std::string& gold_markup,
                            const NeighborStore& store,
                            const std::function<TableImage(const NeighborRecord&)>& load_neighbor,
                            Gateway& gateway, const PromptRegistry& prompts,
                            const std::vector<ToolDescriptor>& tools, const PipelineConfig& cfg) {
  RunReport report;
  report.id = test.id;
  auto started = std::chrono::steady_clock::now();
  PipelineSession session{gateway, prompts, cfg};
  std::string stage = "config";
  try {
    if (cfg.max_plan_len < 1 || cfg.plans_per_generation < 1)
      throw Error("pipeline config requires max_plan_len >= 1 and plans_per_generation >= 1");
    stage = "retrieve";
    auto hits = retrieve(test, store, 1, cfg.features);
    const NeighborRecord& neighbor = *hits[0].record;
    report.neighbor_id = neighbor.id;
    report.neighbor_similarity = hits[0].score;

    stage = "neighbor_image";
    TableImage neighbor_image = load_neighbor(neighbor);

    stage = "generate_plans";
    std::vector<ToolPlan> plans = generate_plans(session, neighbor, neighbor_image, tools);

    stage = "experience";
    if (cfg.experience_enabled) {
      ExperienceResult exp = learn_experience(session, plans, neighbor, neighbor_image);
      report.scoreboard = exp.scoreboard;
      report.chosen_plan = exp.chosen;
      report.chosen_plan_scored_zero = exp.all_zero;
    } else {
      report.chosen_plan = plans.front();  // w/o EXP: first generated plan
    }

    stage = "reflective_execute";
    ReflectiveResult refl = reflective_execute(session, test, report.chosen_plan);
    report.verdicts = refl.verdicts;
    report.applied_tools = refl.applied;

    stage = "recognize";
    RecognitionResult rec = recognize(session, refl.image);
    report.final_markup = rec.markup;

    stage = "score";
    if (!gold_markup.empty()) {
      if (rec.markup.empty()) {
        report.teds = 0.0;
        report.teds_struct = 0.0;
      } else {
        report.teds = teds(rec.markup, gold_markup, CostModel::Mode::Full).value;
        report.teds_struct = teds(rec.markup, gold_markup, CostModel::Mode::StructOnly).value;
      }
    }
    report.ok = true;
  } catch (const Error& e) {
    report.error_stage = stage;
    report.error_message = e.what();
  } catch (const std::exception& e) {
    report.error_stage = stage;
    report.error_message = e.what();
  }
  report.calls = session.call_digests;
  report.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
  return report;
}

}  // namespace ngtr
