#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ngtr/errors.hpp"

namespace ngtr {

/// One table cell addressed by its logical location: inclusive 0-based
/// row/column extents plus content text.
struct LogicalCell {
  int start_row = 0;
  int end_row = 0;
  int start_col = 0;
  int end_col = 0;
  std::string content;

  friend bool operator==(const LogicalCell&, const LogicalCell&) = default;
};

struct LogicalTable {
  std::string id;
  std::vector<LogicalCell> cells;

  friend bool operator==(const LogicalTable& a, const LogicalTable& b) {
    return a.cells == b.cells;
  }
};

/// Sorts cells row-major by (start_row, start_col). All conversions emit
/// this order.
inline void sort_cells(LogicalTable& t) {
  std::stable_sort(t.cells.begin(), t.cells.end(), [](const LogicalCell& a, const LogicalCell& b) {
    if (a.start_row != b.start_row) return a.start_row < b.start_row;
    return a.start_col < b.start_col;
  });
}

struct MatrixEntry {
  enum class Kind { Empty, Anchor, Merged };
  Kind kind = Kind::Empty;
  int rowspan = 1;
  int colspan = 1;
  std::string content;

  static MatrixEntry anchor(int rs, int cs, std::string text) {
    return MatrixEntry{Kind::Anchor, rs, cs, std::move(text)};
  }
  static MatrixEntry merged() { return MatrixEntry{Kind::Merged, 1, 1, {}}; }

  friend bool operator==(const MatrixEntry&, const MatrixEntry&) = default;
};

/// Dense (max_row+1) x (max_col+1) grid where every position is Empty, an
/// Anchor carrying span/content, or Merged (covered by some anchor).
struct TableMatrix {
  size_t n_rows = 0;
  size_t n_cols = 0;
  std::vector<MatrixEntry> entries;  // row-major

  MatrixEntry& at(size_t r, size_t c) { return entries[r * n_cols + c]; }
  const MatrixEntry& at(size_t r, size_t c) const { return entries[r * n_cols + c]; }
};

inline TableMatrix logical_to_matrix(const LogicalTable& table) {
  int max_row = -1, max_col = -1;
  for (const auto& cell : table.cells) {
    if (cell.start_row < 0 || cell.start_col < 0)
      throw IndexError("logical cell has negative index");
    if (cell.end_row < cell.start_row || cell.end_col < cell.start_col)
      throw IndexError("logical cell extent is inverted");
    max_row = std::max(max_row, cell.end_row);
    max_col = std::max(max_col, cell.end_col);
  }
  TableMatrix m;
  if (max_row < 0) return m;  // no cells -> empty matrix
  m.n_rows = static_cast<size_t>(max_row) + 1;
  m.n_cols = static_cast<size_t>(max_col) + 1;
  m.entries.assign(m.n_rows * m.n_cols, MatrixEntry{});
  for (const auto& cell : table.cells) {
    int rowspan = 1 + cell.end_row - cell.start_row;
    int colspan = 1 + cell.end_col - cell.start_col;
    for (int r = cell.start_row; r <= cell.end_row; ++r) {
      for (int c = cell.start_col; c <= cell.end_col; ++c) {
        auto& e = m.at(static_cast<size_t>(r), static_cast<size_t>(c));
        if (e.kind != MatrixEntry::Kind::Empty)
          throw OverlapError("cells overlap at (" + std::to_string(r) + "," + std::to_string(c) + ")");
        if (r == cell.start_row && c == cell.start_col)
          e = MatrixEntry::anchor(rowspan, colspan, cell.content);
        else
          e = MatrixEntry::merged();
      }
    }
  }
  return m;
}

inline std::string escape_markup_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string unescape_markup_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      if (s.substr(i, 4) == "&lt;") { out.push_back('<'); i += 4; continue; }
      if (s.substr(i, 4) == "&gt;") { out.push_back('>'); i += 4; continue; }
      if (s.substr(i, 5) == "&amp;") { out.push_back('&'); i += 5; continue; }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

/// Row-by-row matrix walk: one <tr> per row, Merged entries skipped,
/// anchors emit <td rowspan=R colspan=C> with the attributes always
/// present. Empty positions emit an empty unit td so the grid geometry
/// survives into the markup.
inline std::string matrix_to_markup(const TableMatrix& m) {
  std::string markup = "<table>";
  for (size_t r = 0; r < m.n_rows; ++r) {
    markup += "<tr>";
    for (size_t c = 0; c < m.n_cols; ++c) {
      const auto& e = m.at(r, c);
      if (e.kind == MatrixEntry::Kind::Merged) continue;
      int rowspan = e.kind == MatrixEntry::Kind::Anchor ? e.rowspan : 1;
      int colspan = e.kind == MatrixEntry::Kind::Anchor ? e.colspan : 1;
      markup += "<td rowspan=" + std::to_string(rowspan) + " colspan=" + std::to_string(colspan) + ">";
      if (e.kind == MatrixEntry::Kind::Anchor) markup += escape_markup_text(e.content);
      markup += "</td>";
    }
    markup += "</tr>";
  }
  markup += "</table>";
  return markup;
}

inline std::string logical_to_markup(const LogicalTable& t) {
  return matrix_to_markup(logical_to_matrix(t));
}

}  // namespace ngtr
