#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ngtr/errors.hpp"
#include "ngtr/table.hpp"

namespace ngtr {

struct MarkupNode {
  enum class Tag { Table, Tr, Td };

  MarkupNode() = default;
  explicit MarkupNode(Tag t) : tag(t) {}

  Tag tag = Tag::Td;
  int rowspan = 1;   // td only
  int colspan = 1;   // td only
  std::string content;  // td only
  std::vector<MarkupNode> children;

  friend bool operator==(const MarkupNode&, const MarkupNode&) = default;
};

/// Rooted ordered tree over the table/tr/td subset. Default-constructed
/// trees are empty (no root).
struct MarkupTree {
  std::optional<MarkupNode> root;

  size_t size() const {
    if (!root) return 0;
    size_t n = 0;
    count(*root, n);
    return n;
  }

  friend bool operator==(const MarkupTree&, const MarkupTree&) = default;

 private:
  static void count(const MarkupNode& n, size_t& acc) {
    ++acc;
    for (const auto& c : n.children) count(c, acc);
  }
};

enum class ParseMode { Strict, Lenient };

/// Diagnostics from a parse: dropped-construct warnings plus structural
/// repairs performed in lenient mode.
struct ParseLog {
  std::vector<std::string> warnings;
  std::vector<std::string> repairs;
};

namespace detail {

struct RawTag {
  bool closing = false;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
};

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Parses the inside of <...>. Tolerates quoted and unquoted attribute
// values and a trailing '/'.
inline RawTag parse_tag_body(std::string_view body) {
  RawTag tag;
  size_t i = 0;
  auto skip_ws = [&] { while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i; };
  skip_ws();
  if (i < body.size() && body[i] == '/') {
    tag.closing = true;
    ++i;
  }
  size_t name_start = i;
  while (i < body.size() && (std::isalnum(static_cast<unsigned char>(body[i])) || body[i] == '-')) ++i;
  tag.name = lower(body.substr(name_start, i - name_start));
  while (i < body.size()) {
    skip_ws();
    if (i >= body.size() || body[i] == '/') break;
    size_t key_start = i;
    while (i < body.size() && body[i] != '=' && body[i] != '/' &&
           !std::isspace(static_cast<unsigned char>(body[i])))
      ++i;
    std::string key = lower(body.substr(key_start, i - key_start));
    if (key.empty()) { ++i; continue; }
    std::string value;
    skip_ws();
    if (i < body.size() && body[i] == '=') {
      ++i;
      skip_ws();
      if (i < body.size() && (body[i] == '"' || body[i] == '\'')) {
        char quote = body[i++];
        size_t val_start = i;
        while (i < body.size() && body[i] != quote) ++i;
        value = std::string(body.substr(val_start, i - val_start));
        if (i < body.size()) ++i;
      } else {
        size_t val_start = i;
        while (i < body.size() && body[i] != '/' && !std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        value = std::string(body.substr(val_start, i - val_start));
      }
    }
    tag.attrs.emplace_back(std::move(key), std::move(value));
  }
  return tag;
}

inline bool is_blank(std::string_view s) {
  for (unsigned char c : s)
    if (!std::isspace(c)) return false;
  return true;
}

}  // namespace detail

/// Parses the table/tr/td subset into a normalized MarkupTree. thead/tbody
/// wrappers are flattened, th is read as td, other tags are stripped (their
/// text flows through) with a recorded warning. Missing rowspan/colspan
/// default to 1. Lenient mode repairs unbalanced tags by auto-closing and
/// records each repair; strict mode raises ParseError instead.
inline MarkupTree parse_markup(std::string_view text, ParseMode mode = ParseMode::Lenient,
                               ParseLog* log = nullptr) {
  ParseLog local;
  ParseLog& out_log = log ? *log : local;

  auto warn = [&](std::string msg) { out_log.warnings.push_back(std::move(msg)); };
  auto repair = [&](std::string msg) {
    if (mode == ParseMode::Strict) throw ParseError("malformed markup: " + msg);
    out_log.repairs.push_back(std::move(msg));
  };

  if (detail::is_blank(text)) throw EmptyError("no table element found: empty input");

  MarkupTree tree;
  MarkupNode* table = nullptr;   // set once <table> is seen
  MarkupNode* row = nullptr;     // open <tr>
  MarkupNode* cell = nullptr;    // open <td>
  bool done = false;

  auto open_row = [&]() {
    table->children.push_back(MarkupNode{MarkupNode::Tag::Tr});
    row = &table->children.back();
    cell = nullptr;
  };
  auto close_cell = [&]() { cell = nullptr; };
  auto close_row = [&]() {
    if (cell) { repair("auto-closed td at </tr>"); close_cell(); }
    row = nullptr;
  };

  size_t i = 0;
  while (i < text.size() && !done) {
    if (text[i] == '<') {
      size_t end = text.find('>', i + 1);
      if (end == std::string_view::npos) {
        repair("dropped unterminated tag at end of input");
        break;
      }
      detail::RawTag tag = detail::parse_tag_body(text.substr(i + 1, end - i - 1));
      i = end + 1;

      if (!table) {
        if (!tag.closing && tag.name == "table") {
          tree.root = MarkupNode{MarkupNode::Tag::Table};
          table = &*tree.root;
        }
        continue;  // everything before <table> is ignored
      }

      if (tag.name == "table") {
        if (tag.closing) {
          if (cell) { repair("auto-closed td at </table>"); close_cell(); }
          if (row) { repair("auto-closed tr at </table>"); row = nullptr; }
          done = true;
        } else {
          warn("nested <table> ignored");
        }
      } else if (tag.name == "thead" || tag.name == "tbody" || tag.name == "tfoot") {
        // section wrappers flatten away
      } else if (tag.name == "tr") {
        if (tag.closing) {
          if (!row) { warn("stray </tr> ignored"); continue; }
          close_row();
        } else {
          if (cell) { repair("auto-closed td at <tr>"); close_cell(); }
          if (row) { repair("auto-closed tr at <tr>"); row = nullptr; }
          open_row();
        }
      } else if (tag.name == "td" || tag.name == "th") {
        if (tag.name == "th") warn("th read as td");
        if (tag.closing) {
          if (!cell) { warn("stray </td> ignored"); continue; }
          close_cell();
        } else {
          if (cell) { repair("auto-closed td at <td>"); close_cell(); }
          if (!row) { repair("opened implicit tr for td"); open_row(); }
          row->children.push_back(MarkupNode{MarkupNode::Tag::Td});
          cell = &row->children.back();
          for (const auto& [key, value] : tag.attrs) {
            if (key == "rowspan" || key == "colspan") {
              int span = 0;
              try { span = std::stoi(value); } catch (...) { span = 0; }
              if (span < 1) {
                if (mode == ParseMode::Strict)
                  throw ParseError("non-positive " + key + " value '" + value + "'");
                warn("invalid " + key + " '" + value + "' defaulted to 1");
                span = 1;
              }
              (key == "rowspan" ? cell->rowspan : cell->colspan) = span;
            } else {
              warn("dropped attribute '" + key + "' on td");
            }
          }
        }
      } else {
        warn("dropped tag <" + std::string(tag.closing ? "/" : "") + tag.name + ">");
      }
    } else {
      size_t next = text.find('<', i);
      if (next == std::string_view::npos) next = text.size();
      std::string_view chunk = text.substr(i, next - i);
      if (table && cell) {
        cell->content += unescape_markup_text(chunk);
      } else if (table && !detail::is_blank(chunk)) {
        warn("ignored text outside td");
      }
      i = next;
    }
  }

  if (!tree.root) throw EmptyError("no table element found");
  if (!done) {
    if (cell) { repair("auto-closed td at end of input"); cell = nullptr; }
    if (row) { repair("auto-closed tr at end of input"); row = nullptr; }
    repair("auto-closed table at end of input");
  }
  return tree;
}

/// Serializes a tree back to the tag string. By default span attributes
/// are always written; omit_unit_spans drops rowspan=1/colspan=1.
inline std::string serialize_markup(const MarkupTree& tree, bool omit_unit_spans = false) {
  if (!tree.root) return "";
  std::string out = "<table>";
  for (const auto& tr : tree.root->children) {
    out += "<tr>";
    for (const auto& td : tr.children) {
      out += "<td";
      if (!omit_unit_spans || td.rowspan != 1) out += " rowspan=" + std::to_string(td.rowspan);
      if (!omit_unit_spans || td.colspan != 1) out += " colspan=" + std::to_string(td.colspan);
      out += ">";
      out += escape_markup_text(td.content);
      out += "</td>";
    }
    out += "</tr>";
  }
  out += "</table>";
  return out;
}

/// Span-resolution sweep from tree to logical cells: per-column occupancy
/// counters assign each td the leftmost free column of its row.
inline LogicalTable markup_to_logical(const MarkupTree& tree, std::string id = {}) {
  LogicalTable out;
  out.id = std::move(id);
  if (!tree.root) return out;

  std::vector<int> occupied_until;  // per column: first row index not yet covered
  const auto& rows = tree.root->children;
  for (size_t r = 0; r < rows.size(); ++r) {
    size_t col = 0;
    for (const auto& td : rows[r].children) {
      while (col < occupied_until.size() && occupied_until[col] > static_cast<int>(r)) ++col;
      size_t end_col = col + static_cast<size_t>(td.colspan);
      if (end_col > occupied_until.size()) occupied_until.resize(end_col, 0);
      for (size_t c = col; c < end_col; ++c) {
        if (occupied_until[c] > static_cast<int>(r))
          throw GeometryError("colspan collides with a rowspan from an earlier row");
        occupied_until[c] = static_cast<int>(r) + td.rowspan;
      }
      out.cells.push_back(LogicalCell{
          static_cast<int>(r), static_cast<int>(r) + td.rowspan - 1,
          static_cast<int>(col), static_cast<int>(end_col) - 1, td.content});
      col = end_col;
    }
  }
  sort_cells(out);
  return out;
}

inline LogicalTable markup_to_logical(std::string_view markup, std::string id = {},
                                      ParseMode mode = ParseMode::Lenient, ParseLog* log = nullptr) {
  return markup_to_logical(parse_markup(markup, mode, log), std::move(id));
}

/// Grid dimensions implied by a tree: (rows, cols) after span resolution.
inline std::pair<int, int> tree_grid_size(const MarkupTree& tree) {
  LogicalTable t = markup_to_logical(tree);
  int max_row = -1, max_col = -1;
  for (const auto& c : t.cells) {
    max_row = std::max(max_row, c.end_row);
    max_col = std::max(max_col, c.end_col);
  }
  return {max_row + 1, max_col + 1};
}

}  // namespace ngtr
