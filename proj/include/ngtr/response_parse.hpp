#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngtr/errors.hpp"
#include "ngtr/plan.hpp"

namespace ngtr {

namespace detail {

inline std::string strip_code_fences(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  size_t i = 0;
  while (i < raw.size()) {
    size_t eol = raw.find('\n', i);
    if (eol == std::string_view::npos) eol = raw.size();
    std::string_view line = raw.substr(i, eol - i);
    size_t first = line.find_first_not_of(" \t");
    bool fence = first != std::string_view::npos && line.substr(first, 3) == "```";
    if (!fence) {
      out.append(line);
      out.push_back('\n');
    }
    i = eol + 1;
  }
  return out;
}

inline std::string lower_copy(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

/// Extracts the first <table>...</table> span from model output, after
/// dropping code fences and surrounding prose. A missing closing tag is
/// tolerated (the lenient markup parser repairs it downstream).
inline std::string parse_markup_response(std::string_view raw) {
  std::string text = detail::strip_code_fences(raw);
  std::string lowered = detail::lower_copy(text);
  size_t open = lowered.find("<table");
  if (open == std::string::npos) throw NoTableError("no table element in model response");
  size_t close = lowered.find("</table>", open);
  if (close == std::string::npos) return text.substr(open);
  return text.substr(open, close + 8 - open);
}

/// Sanitized plan list from a model response. Accepts a JSON array of
/// plans (preferred; each plan an array of tool-id strings) or loose
/// line-based lists. Unknown tools are dropped, consecutive duplicates
/// collapsed, plans truncated to L, duplicates removed, at most N returned.
/// Always returns at least one plan: the empty plan is the floor.
inline std::vector<ToolPlan> parse_plans_response(std::string_view raw, int max_len, int max_plans,
                                                  const std::set<ToolId>& known_tools) {
  std::vector<std::vector<std::string>> token_plans;

  std::string text = detail::strip_code_fences(raw);
  size_t open = text.find('[');
  size_t close = text.rfind(']');
  bool parsed_json = false;
  if (open != std::string::npos && close != std::string::npos && close > open) {
    nlohmann::json j = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr,
                                             /*allow_exceptions=*/false);
    if (j.is_array()) {
      parsed_json = true;
      for (const auto& plan : j) {
        std::vector<std::string> tokens;
        if (plan.is_array()) {
          for (const auto& step : plan)
            if (step.is_string()) tokens.push_back(step.get<std::string>());
        } else if (plan.is_string()) {
          tokens.push_back(plan.get<std::string>());
        }
        token_plans.push_back(std::move(tokens));
      }
    }
  }
  if (!parsed_json) {
    // one plan per line; tokens separated by commas/arrows
    size_t i = 0;
    while (i <= text.size()) {
      size_t eol = text.find('\n', i);
      if (eol == std::string::npos) eol = text.size();
      std::string line = text.substr(i, eol - i);
      i = eol + 1;
      // strip leading list markers: "1.", "2)", "-", "*"
      size_t start = line.find_first_not_of(" \t");
      if (start != std::string::npos) {
        size_t p = start;
        while (p < line.size() && std::isdigit(static_cast<unsigned char>(line[p]))) ++p;
        if (p < line.size() && (line[p] == '.' || line[p] == ')')) ++p;
        while (p < line.size() && (line[p] == '-' || line[p] == '*' || line[p] == ' ')) ++p;
        line = line.substr(p > start ? p : start);
      }
      std::vector<std::string> tokens;
      std::string cur;
      for (char c : line) {
        if (c == ',' || c == '>' || c == '|' || c == ';') {
          if (!cur.empty()) tokens.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
      if (!cur.empty()) tokens.push_back(cur);
      if (!tokens.empty()) token_plans.push_back(std::move(tokens));
      if (eol == text.size()) break;
    }
  }

  std::vector<ToolPlan> plans;
  for (auto& tokens : token_plans) {
    ToolPlan plan;
    plan.origin = ToolPlan::Origin::ModelGenerated;
    for (const auto& token : tokens) {
      auto id = tool_from_string(token);
      if (!id || !known_tools.count(*id)) continue;  // sanitize unknown tools
      if (!plan.steps.empty() && plan.steps.back() == *id) continue;
      plan.steps.push_back(*id);
      if (static_cast<int>(plan.steps.size()) >= max_len) break;
    }
    if (plan.steps.empty()) continue;
    if (std::find(plans.begin(), plans.end(), plan) != plans.end()) continue;
    plans.push_back(std::move(plan));
    if (static_cast<int>(plans.size()) >= max_plans) break;
  }
  if (plans.empty()) plans.push_back(empty_plan());
  return plans;
}

struct ReflectionChoice {
  int gamma = 0;        // 1 = accept the post-operation image
  bool parse_warning = false;
};

/// Maps the reflection answer to gamma: IMAGE_2 (post-op better) accepts,
/// IMAGE_1 rejects, anything ambiguous rejects with a warning.
inline ReflectionChoice parse_reflection_response(std::string_view raw) {
  std::string upper(raw);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  bool has1 = upper.find("IMAGE_1") != std::string::npos;
  bool has2 = upper.find("IMAGE_2") != std::string::npos;
  if (has2 && !has1) return {1, false};
  if (has1 && !has2) return {0, false};
  return {0, true};
}

}  // namespace ngtr
