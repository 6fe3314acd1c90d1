#pragma once

#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ngtr/digest.hpp"
#include "ngtr/errors.hpp"

namespace ngtr {

/// 8-bit raster (1 or 3 channels) plus identity and an append-only record
/// of the transforms applied to it.
struct TableImage {
  cv::Mat pixels;
  std::optional<int> dpi_hint;
  std::string id;
  std::vector<std::string> provenance;

  int height() const { return pixels.rows; }
  int width() const { return pixels.cols; }
  int channels() const { return pixels.channels(); }
};

inline void validate_image(const TableImage& img) {
  if (img.pixels.empty() || img.pixels.depth() != CV_8U)
    throw ImageError("image must be a non-empty 8-bit raster");
  if (img.height() < 8 || img.width() < 8)
    throw ImageError("image smaller than 8x8");
  if (img.channels() != 1 && img.channels() != 3)
    throw ImageError("image must have 1 or 3 channels");
}

/// Child image carrying over identity/provenance; pixels supplied by the
/// caller (already transformed).
inline TableImage derive_image(const TableImage& src, cv::Mat pixels, std::string provenance_entry) {
  TableImage out;
  out.pixels = std::move(pixels);
  out.dpi_hint = src.dpi_hint;
  out.id = src.id;
  out.provenance = src.provenance;
  out.provenance.push_back(std::move(provenance_entry));
  return out;
}

inline cv::Mat to_gray(const cv::Mat& m) {
  if (m.channels() == 1) return m;
  cv::Mat gray;
  cv::cvtColor(m, gray, cv::COLOR_BGR2GRAY);
  return gray;
}

/// Stable digest over dimensions, channel count and raw pixel bytes.
inline std::string pixel_digest(const TableImage& img) {
  const cv::Mat& m = img.pixels;
  uint64_t h = fnv1a64_bytes(&m.rows, sizeof(m.rows));
  h = fnv1a64_bytes(&m.cols, sizeof(m.cols), h);
  int ch = m.channels();
  h = fnv1a64_bytes(&ch, sizeof(ch), h);
  for (int r = 0; r < m.rows; ++r)
    h = fnv1a64_bytes(m.ptr(r), static_cast<size_t>(m.cols) * static_cast<size_t>(m.elemSize()),
                      h);
  return hex64(h);
}

inline bool pixels_identical(const TableImage& a, const TableImage& b) {
  if (a.pixels.size() != b.pixels.size() || a.pixels.type() != b.pixels.type()) return false;
  return cv::countNonZero(to_gray(a.pixels) != to_gray(b.pixels)) == 0 &&
         (a.channels() == 1 || cv::norm(a.pixels, b.pixels, cv::NORM_INF) == 0.0);
}

inline TableImage load_image(const std::string& path, std::string id = {}) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw ImageError("cannot read image: " + path);
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  TableImage img;
  img.pixels = m;
  img.id = id.empty() ? path : std::move(id);
  return img;
}

inline std::vector<uint8_t> encode_png(const TableImage& img) {
  std::vector<uint8_t> buf;
  if (!cv::imencode(".png", img.pixels, buf)) throw ImageError("png encode failed");
  return buf;
}

inline void save_png(const TableImage& img, const std::string& path) {
  if (!cv::imwrite(path, img.pixels)) throw ImageError("cannot write image: " + path);
}

}  // namespace ngtr
