#pragma once

#include <random>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "ngtr/image.hpp"
#include "ngtr/table.hpp"

namespace ngtr {

/// Random fully-tiled table layout on a grid of at most max_rows x
/// max_cols: every grid position is covered by exactly one cell. Pure in
/// (seed, bounds).
struct LayoutGenOptions {
  int min_rows = 1;
  int min_cols = 1;
  int max_rows = 10;
  int max_cols = 10;
  int max_span = 3;
  double empty_content_prob = 0.1;
  bool special_chars = true;  // sprinkle & < > into contents
};

inline LogicalTable random_logical_table(std::mt19937_64& rng, const LayoutGenOptions& opt = {}) {
  std::uniform_int_distribution<int> rdist(opt.min_rows, opt.max_rows),
      cdist(opt.min_cols, opt.max_cols);
  const int R = rdist(rng), C = cdist(rng);
  std::vector<std::vector<bool>> covered(R, std::vector<bool>(C, false));
  LogicalTable table;

  auto rand_content = [&](int idx) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < opt.empty_content_prob) return std::string{};
    static const char* words[] = {"alpha", "beta", "gamma", "delta", "total", "sum",
                                  "x1",    "y2",   "n/a",   "42",    "3.14",  "rate"};
    std::uniform_int_distribution<size_t> w(0, std::size(words) - 1);
    std::string s = words[w(rng)];
    s += std::to_string(idx);
    if (opt.special_chars && u(rng) < 0.15) {
      static const char* extras[] = {" & ", " <b>", " a>b", "&amp;"};
      std::uniform_int_distribution<size_t> e(0, std::size(extras) - 1);
      s += extras[e(rng)];
    }
    return s;
  };

  int cell_idx = 0;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (covered[r][c]) continue;
      std::uniform_int_distribution<int> span(1, opt.max_span);
      int rowspan = std::min(span(rng), R - r);
      int colspan = std::min(span(rng), C - c);
      // shrink the rectangle until it only covers free positions
      while (colspan > 1 && covered[r][c + colspan - 1]) --colspan;
      auto rect_free = [&](int rs, int cs) {
        for (int rr = r; rr < r + rs; ++rr)
          for (int cc = c; cc < c + cs; ++cc)
            if (covered[rr][cc]) return false;
        return true;
      };
      while (rowspan > 1 && !rect_free(rowspan, colspan)) --rowspan;
      while (colspan > 1 && !rect_free(rowspan, colspan)) --colspan;
      for (int rr = r; rr < r + rowspan; ++rr)
        for (int cc = c; cc < c + colspan; ++cc) covered[rr][cc] = true;
      table.cells.push_back(
          LogicalCell{r, r + rowspan - 1, c, c + colspan - 1, rand_content(cell_idx++)});
    }
  }
  sort_cells(table);
  return table;
}

struct RenderOptions {
  int cell_width = 72;
  int cell_height = 34;
  int margin = 18;
  int line_px = 1;
  int background = 235;
  int ink = 20;
  double font_scale = 0.42;
  bool draw_grid = true;
};

/// Renders a logical table to a grayscale raster: ruling lines along the
/// grid plus cell contents as text. Deterministic.
inline TableImage render_table_image(const LogicalTable& table, const RenderOptions& opt = {},
                                     std::string id = {}) {
  int max_row = 0, max_col = 0;
  for (const auto& c : table.cells) {
    max_row = std::max(max_row, c.end_row);
    max_col = std::max(max_col, c.end_col);
  }
  const int rows = max_row + 1, cols = max_col + 1;
  const int w = opt.margin * 2 + cols * opt.cell_width;
  const int h = opt.margin * 2 + rows * opt.cell_height;
  cv::Mat canvas(h, w, CV_8UC1, cv::Scalar(opt.background));

  auto px = [&](int col) { return opt.margin + col * opt.cell_width; };
  auto py = [&](int row) { return opt.margin + row * opt.cell_height; };

  if (opt.draw_grid) {
    for (const auto& c : table.cells) {
      cv::rectangle(canvas, {px(c.start_col), py(c.start_row)},
                    {px(c.end_col + 1), py(c.end_row + 1)}, cv::Scalar(opt.ink), opt.line_px);
    }
  }
  for (const auto& c : table.cells) {
    if (c.content.empty()) continue;
    std::string text = c.content.substr(0, 10);
    cv::putText(canvas, text, {px(c.start_col) + 5, py(c.start_row) + opt.cell_height / 2 + 5},
                cv::FONT_HERSHEY_SIMPLEX, opt.font_scale, cv::Scalar(opt.ink), 1, cv::LINE_8);
  }
  TableImage img;
  img.pixels = canvas;
  img.id = std::move(id);
  return img;
}

}  // namespace ngtr
