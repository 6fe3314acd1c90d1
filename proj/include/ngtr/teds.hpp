#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "ngtr/errors.hpp"
#include "ngtr/markup.hpp"
#include "ngtr/text.hpp"

namespace ngtr {

/// Edit cost model over table trees. Full scores content via normalized
/// Levenshtein on matching td nodes; StructOnly zeroes the content term.
struct CostModel {
  enum class Mode { Full, StructOnly };
  Mode mode = Mode::Full;
  double insert_cost = 1.0;
  double delete_cost = 1.0;

  double relabel(const MarkupNode& a, const MarkupNode& b) const {
    if (a.tag != b.tag) return 1.0;
    if (a.tag != MarkupNode::Tag::Td) return 0.0;
    if (a.rowspan != b.rowspan || a.colspan != b.colspan) return 1.0;
    if (mode == Mode::StructOnly) return 0.0;
    return normalized_levenshtein(a.content, b.content);
  }
};

namespace detail {

// Postorder flattening with leftmost-descendant indices and keyroots,
// the standard Zhang-Shasha preparation.
struct FlatTree {
  std::vector<const MarkupNode*> nodes;  // postorder
  std::vector<int> lmd;                  // leftmost descendant per node
  std::vector<int> keyroots;

  explicit FlatTree(const MarkupTree& t) {
    if (t.root) visit(*t.root);
    std::unordered_map<int, int> last_with_lmd;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) last_with_lmd[lmd[i]] = i;
    for (auto& [l, i] : last_with_lmd) keyroots.push_back(i);
    std::sort(keyroots.begin(), keyroots.end());
  }

  int size() const { return static_cast<int>(nodes.size()); }

 private:
  int visit(const MarkupNode& n) {
    int leftmost = -1;
    for (const auto& c : n.children) {
      int child_lmd = visit(c);
      if (leftmost < 0) leftmost = child_lmd;
    }
    int idx = static_cast<int>(nodes.size());
    if (leftmost < 0) leftmost = idx;
    nodes.push_back(&n);
    lmd.push_back(leftmost);
    return leftmost;
  }
};

}  // namespace detail

/// Minimal-cost ordered-tree edit distance (Zhang-Shasha recurrence).
inline double tree_edit_distance(const MarkupTree& a, const MarkupTree& b, const CostModel& cost = {}) {
  detail::FlatTree fa(a), fb(b);
  const int na = fa.size(), nb = fb.size();
  if (na == 0 && nb == 0) return 0.0;
  if (na == 0) return nb * cost.insert_cost;
  if (nb == 0) return na * cost.delete_cost;

  std::vector<double> treedist(static_cast<size_t>(na) * nb, 0.0);
  auto td = [&](int i, int j) -> double& { return treedist[static_cast<size_t>(i) * nb + j]; };

  std::vector<double> fd;  // forest-distance scratch, reused per keyroot pair
  for (int i : fa.keyroots) {
    for (int j : fb.keyroots) {
      const int ioff = fa.lmd[i] - 1;
      const int joff = fb.lmd[j] - 1;
      const int m = i - ioff + 1;  // forest sizes + 1
      const int n = j - joff + 1;
      fd.assign(static_cast<size_t>(m) * n, 0.0);
      auto f = [&](int x, int y) -> double& { return fd[static_cast<size_t>(x) * n + y]; };

      for (int x = 1; x < m; ++x) f(x, 0) = f(x - 1, 0) + cost.delete_cost;
      for (int y = 1; y < n; ++y) f(0, y) = f(0, y - 1) + cost.insert_cost;
      for (int x = 1; x < m; ++x) {
        for (int y = 1; y < n; ++y) {
          if (fa.lmd[x + ioff] == fa.lmd[i] && fb.lmd[y + joff] == fb.lmd[j]) {
            double rel = cost.relabel(*fa.nodes[x + ioff], *fb.nodes[y + joff]);
            f(x, y) = std::min({f(x - 1, y) + cost.delete_cost,
                                f(x, y - 1) + cost.insert_cost,
                                f(x - 1, y - 1) + rel});
            td(x + ioff, y + joff) = f(x, y);
          } else {
            int p = fa.lmd[x + ioff] - 1 - ioff;
            int q = fb.lmd[y + joff] - 1 - joff;
            f(x, y) = std::min({f(x - 1, y) + cost.delete_cost,
                                f(x, y - 1) + cost.insert_cost,
                                f(p, q) + td(x + ioff, y + joff)});
          }
        }
      }
    }
  }
  return td(na - 1, nb - 1);
}

struct TedsScore {
  double value = 0.0;
  double edit_distance = 0.0;
  size_t size_a = 0;
  size_t size_b = 0;
};

/// 1 - EditDist(a,b)/max(|a|,|b|). StructOnly gives the structure-only
/// variant that ignores cell content.
inline TedsScore teds(const MarkupTree& pred, const MarkupTree& gold,
                      CostModel::Mode mode = CostModel::Mode::Full) {
  TedsScore s;
  s.size_a = pred.size();
  s.size_b = gold.size();
  if (s.size_a == 0 && s.size_b == 0) throw DegenerateError("both trees are empty");
  CostModel cost;
  cost.mode = mode;
  s.edit_distance = tree_edit_distance(pred, gold, cost);
  double denom = static_cast<double>(std::max(s.size_a, s.size_b));
  s.value = 1.0 - s.edit_distance / denom;
  s.value = std::clamp(s.value, 0.0, 1.0);
  return s;
}

inline TedsScore teds(std::string_view pred_markup, std::string_view gold_markup,
                      CostModel::Mode mode = CostModel::Mode::Full) {
  MarkupTree p = pred_markup.empty() ? MarkupTree{} : parse_markup(pred_markup, ParseMode::Lenient);
  MarkupTree g = parse_markup(gold_markup, ParseMode::Lenient);
  return teds(p, g, mode);
}

struct F1Counts {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

inline F1Counts f1_counts(const std::vector<std::string>& pred_items,
                          const std::vector<std::string>& gold_items) {
  std::unordered_map<std::string, size_t> gold_counts;
  for (const auto& g : gold_items) ++gold_counts[g];
  F1Counts c;
  for (const auto& p : pred_items) {
    auto it = gold_counts.find(p);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = gold_items.size() - c.tp;
  return c;
}

/// Multiset micro-F1: each gold item consumes at most one equal predicted
/// item. Items are expected pre-normalized.
inline double micro_f1(const std::vector<std::string>& pred_items,
                       const std::vector<std::string>& gold_items) {
  return f1_counts(pred_items, gold_items).f1();
}

/// Exact-match accuracy on normalized text answers.
inline int exact_accuracy(std::string_view pred, std::string_view gold) {
  return normalize_text(pred) == normalize_text(gold) ? 1 : 0;
}

inline int exact_accuracy(std::pair<int, int> pred, std::pair<int, int> gold) {
  return pred == gold ? 1 : 0;
}

}  // namespace ngtr
