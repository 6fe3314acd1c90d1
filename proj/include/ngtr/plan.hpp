#pragma once

#include <string>
#include <vector>

#include "ngtr/toolkit.hpp"

namespace ngtr {

/// Ordered tool invocation sequence, length-capped at the configured L.
/// Invariant: no two consecutive identical steps.
struct ToolPlan {
  enum class Origin { ModelGenerated, Empty, Manual };

  std::vector<ToolId> steps;
  Origin origin = Origin::Empty;

  bool empty() const { return steps.empty(); }
  size_t size() const { return steps.size(); }

  std::string to_string() const {
    if (steps.empty()) return "(none)";
    std::string out;
    for (size_t i = 0; i < steps.size(); ++i) {
      if (i) out += ">";
      out += ngtr::to_string(steps[i]);
    }
    return out;
  }

  friend bool operator==(const ToolPlan& a, const ToolPlan& b) { return a.steps == b.steps; }
};

inline ToolPlan empty_plan() { return ToolPlan{{}, ToolPlan::Origin::Empty}; }

}  // namespace ngtr
