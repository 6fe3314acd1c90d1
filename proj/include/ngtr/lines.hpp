#pragma once

#include <algorithm>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "ngtr/image.hpp"

namespace ngtr {

struct LineDetectParams {
  int dark_threshold = 128;   // pixel <= threshold counts as ink
  double min_length_frac = 0.3;  // of min(H, W)
};

/// Binary mask (255 = ruling line pixel) of long horizontal/vertical dark
/// runs, found by morphological opening with line-shaped kernels.
inline cv::Mat ruling_line_mask(const cv::Mat& pixels, const LineDetectParams& p = {}) {
  cv::Mat gray = to_gray(pixels);
  cv::Mat dark;
  cv::threshold(gray, dark, p.dark_threshold, 255, cv::THRESH_BINARY_INV);
  int len = std::max(3, static_cast<int>(p.min_length_frac * std::min(gray.rows, gray.cols)));
  cv::Mat horiz, vert;
  cv::morphologyEx(dark, horiz, cv::MORPH_OPEN,
                   cv::getStructuringElement(cv::MORPH_RECT, {len, 1}));
  cv::morphologyEx(dark, vert, cv::MORPH_OPEN,
                   cv::getStructuringElement(cv::MORPH_RECT, {1, len}));
  cv::Mat mask;
  cv::bitwise_or(horiz, vert, mask);
  return mask;
}

/// Number of connected ruling-line segments (0 means no lines detected).
inline int count_ruling_lines(const TableImage& img, const LineDetectParams& p = {}) {
  cv::Mat mask = ruling_line_mask(img.pixels, p);
  if (cv::countNonZero(mask) == 0) return 0;
  cv::Mat labels;
  int n = cv::connectedComponents(mask, labels, 8);
  return n - 1;  // minus background
}

/// Tilt magnitude in degrees within [0, 45], measured as the strongest
/// Hough line's angular distance to the nearest grid axis. Used to verify
/// tilt scenarios.
inline double dominant_line_angle_deg(const TableImage& img) {
  cv::Mat gray = to_gray(img.pixels);
  cv::Mat edges;
  cv::Canny(gray, edges, 60, 180);
  std::vector<cv::Vec2f> lines;
  cv::HoughLines(edges, lines, 1.0, CV_PI / 1440.0, 40);
  if (lines.empty()) return 0.0;
  // rho-theta normal form: line direction = theta - 90deg
  double theta_deg = lines[0][1] * 180.0 / CV_PI;
  double dir = theta_deg - 90.0;
  while (dir < 0) dir += 180.0;
  // fold onto [0, 45]: the grid has both orientations and tilt is unsigned
  while (dir >= 90.0) dir -= 90.0;
  return std::min(dir, 90.0 - dir);
}

}  // namespace ngtr
