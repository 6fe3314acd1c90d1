#pragma once

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "ngtr/image.hpp"
#include "ngtr/lines.hpp"

namespace ngtr {

enum class ToolId { BorderEnhance, Upscale, NoiseReduce, Binarize, DetectCrop };

inline const std::vector<ToolId>& all_tools() {
  static const std::vector<ToolId> tools = {ToolId::BorderEnhance, ToolId::Upscale,
                                            ToolId::NoiseReduce, ToolId::Binarize,
                                            ToolId::DetectCrop};
  return tools;
}

inline std::string to_string(ToolId id) {
  switch (id) {
    case ToolId::BorderEnhance: return "BorderEnhance";
    case ToolId::Upscale: return "Upscale";
    case ToolId::NoiseReduce: return "NoiseReduce";
    case ToolId::Binarize: return "Binarize";
    case ToolId::DetectCrop: return "DetectCrop";
  }
  return "?";
}

/// Maps a model-emitted tool name to a ToolId. Case/spacing-insensitive and
/// tolerant of the descriptive names used in prompts.
inline std::optional<ToolId> tool_from_string(std::string_view raw) {
  std::string key;
  for (unsigned char c : raw)
    if (std::isalnum(c)) key.push_back(static_cast<char>(std::tolower(c)));
  if (key == "borderenhance" || key == "borderenhancement") return ToolId::BorderEnhance;
  if (key == "upscale" || key == "imageupscaling" || key == "upscaling") return ToolId::Upscale;
  if (key == "noisereduce" || key == "noisereduction") return ToolId::NoiseReduce;
  if (key == "binarize" || key == "binarization") return ToolId::Binarize;
  if (key == "detectcrop" || key == "detectioncrop" || key == "detectionandcropping" ||
      key == "tabledetectionandcropping")
    return ToolId::DetectCrop;
  return std::nullopt;
}

/// Tool metadata injected into planning prompts.
struct ToolDescriptor {
  ToolId id;
  std::string description;
  std::string applicable_scenarios;
};

inline std::vector<ToolDescriptor> default_tool_descriptors() {
  return {
      {ToolId::BorderEnhance,
       "Thickens detected table ruling lines so the row/column grid stands out.",
       "faint, thin or partially visible table borders"},
      {ToolId::Upscale,
       "Enlarges the image with bicubic interpolation to raise effective resolution.",
       "low-resolution or blurry images with smeared glyphs"},
      {ToolId::NoiseReduce,
       "Stretches brightness/contrast to the full range and median-filters speckle noise.",
       "underexposed, low-contrast or noisy captures"},
      {ToolId::Binarize,
       "Converts the image to pure black and white with a global Otsu threshold.",
       "uneven lighting where text/background separation helps"},
      {ToolId::DetectCrop,
       "Locates the table region and crops it out with a small margin.",
       "tables occupying only part of a larger or cluttered frame"},
  };
}

/// Renders the descriptor list as the {tool_descriptions} prompt block.
inline std::string describe_tools(const std::vector<ToolDescriptor>& tools) {
  std::string out;
  for (const auto& t : tools) {
    out += "- " + to_string(t.id) + ": " + t.description +
           " Suited for: " + t.applicable_scenarios + "\n";
  }
  return out;
}

struct ToolkitConfig {
  int border_thickness = 2;
  double default_upscale_factor = 2.0;
  size_t pixel_budget = 16'000'000;
  LineDetectParams lines;
  double percentile_low = 2.0;
  double percentile_high = 98.0;
  int crop_margin = 5;
  double min_region_frac = 0.05;
};

inline TableImage border_enhance(const TableImage& img, const ToolkitConfig& cfg = {}) {
  validate_image(img);
  const int t = cfg.border_thickness;
  std::string note = "BorderEnhance(thickness=" + std::to_string(t) + ")";
  cv::Mat mask = ruling_line_mask(img.pixels, cfg.lines);
  if (cv::countNonZero(mask) == 0)
    return derive_image(img, img.pixels.clone(), note + "[no-lines]");
  cv::Mat grown;
  cv::dilate(mask, grown,
             cv::getStructuringElement(cv::MORPH_RECT, {2 * t + 1, 2 * t + 1}));
  double line_value = 0.0;
  cv::minMaxLoc(to_gray(img.pixels), &line_value, nullptr, nullptr, nullptr, mask);
  cv::Mat out = img.pixels.clone();
  out.setTo(img.channels() == 1 ? cv::Scalar(line_value)
                                : cv::Scalar(line_value, line_value, line_value),
            grown);
  return derive_image(img, out, note);
}

inline TableImage upscale(const TableImage& img, double factor, const ToolkitConfig& cfg = {}) {
  validate_image(img);
  if (factor < 1.0 || factor > 4.0)
    throw std::invalid_argument("upscale factor must be in [1.0, 4.0]");
  std::string note = "Upscale(factor=" + std::to_string(factor) + ")";
  if (factor == 1.0) return derive_image(img, img.pixels.clone(), note);
  int out_w = static_cast<int>(std::lround(factor * img.width()));
  int out_h = static_cast<int>(std::lround(factor * img.height()));
  if (static_cast<size_t>(out_w) * static_cast<size_t>(out_h) > cfg.pixel_budget)
    throw SizeError("upscale output " + std::to_string(out_w) + "x" + std::to_string(out_h) +
                    " exceeds pixel budget");
  cv::Mat out;
  cv::resize(img.pixels, out, {out_w, out_h}, 0, 0, cv::INTER_CUBIC);
  return derive_image(img, out, note);
}

inline TableImage upscale(const TableImage& img, const ToolkitConfig& cfg = {}) {
  return upscale(img, cfg.default_upscale_factor, cfg);
}

namespace detail {

inline int intensity_percentile(const cv::Mat& gray, double pct) {
  int hist[256] = {0};
  for (int r = 0; r < gray.rows; ++r) {
    const uint8_t* row = gray.ptr<uint8_t>(r);
    for (int c = 0; c < gray.cols; ++c) ++hist[row[c]];
  }
  const long total = static_cast<long>(gray.rows) * gray.cols;
  const long target = static_cast<long>(pct / 100.0 * total);
  long cum = 0;
  for (int v = 0; v < 256; ++v) {
    cum += hist[v];
    if (cum >= target) return v;
  }
  return 255;
}

}  // namespace detail

inline TableImage noise_reduce(const TableImage& img, const ToolkitConfig& cfg = {}) {
  validate_image(img);
  cv::Mat gray = to_gray(img.pixels);
  int lo = detail::intensity_percentile(gray, cfg.percentile_low);
  int hi = detail::intensity_percentile(gray, cfg.percentile_high);
  cv::Mat remapped;
  if (hi > lo) {
    cv::Mat lut(1, 256, CV_8U);
    for (int v = 0; v < 256; ++v) {
      double y = (v - lo) * 255.0 / (hi - lo);
      lut.at<uint8_t>(v) = cv::saturate_cast<uint8_t>(std::lround(y));
    }
    cv::LUT(img.pixels, lut, remapped);
  } else {
    remapped = img.pixels.clone();  // degenerate histogram
  }
  cv::Mat out;
  cv::medianBlur(remapped, out, 3);
  return derive_image(img, out,
                      "NoiseReduce(p" + std::to_string(static_cast<int>(cfg.percentile_low)) + "-p" +
                          std::to_string(static_cast<int>(cfg.percentile_high)) + ",median3)");
}

inline TableImage binarize(const TableImage& img, const ToolkitConfig& = {}) {
  validate_image(img);
  cv::Mat gray = to_gray(img.pixels).clone();
  double mn, mx;
  cv::minMaxLoc(gray, &mn, &mx);
  cv::Mat out;
  if (mn == mx) {
    out = cv::Mat(gray.size(), CV_8UC1, cv::Scalar(mn >= 128 ? 255 : 0));
  } else {
    cv::threshold(gray, out, 0, 255, cv::THRESH_BINARY | cv::THRESH_OTSU);
  }
  return derive_image(img, out, "Binarize(otsu)");
}

inline TableImage detect_and_crop(const TableImage& img, const ToolkitConfig& cfg = {}) {
  validate_image(img);
  cv::Mat mask = ruling_line_mask(img.pixels, cfg.lines);
  cv::Rect box;
  if (cv::countNonZero(mask) > 0) {
    box = cv::boundingRect(mask);
  } else {
    cv::Mat gray = to_gray(img.pixels);
    double mn, mx;
    cv::minMaxLoc(gray, &mn, &mx);
    cv::Mat dark;
    if (mn == mx) {
      dark = cv::Mat::zeros(gray.size(), CV_8UC1);
    } else {
      cv::threshold(gray, dark, 0, 255, cv::THRESH_BINARY_INV | cv::THRESH_OTSU);
    }
    box = cv::countNonZero(dark) > 0 ? cv::boundingRect(dark) : cv::Rect{};
  }
  double frac = static_cast<double>(box.area()) / (static_cast<double>(img.width()) * img.height());
  if (box.area() == 0 || frac < cfg.min_region_frac)
    return derive_image(img, img.pixels.clone(), "DetectCrop(NoTableFound)");
  int m = cfg.crop_margin;
  int x0 = std::max(0, box.x - m);
  int y0 = std::max(0, box.y - m);
  int x1 = std::min(img.width(), box.x + box.width + m);
  int y1 = std::min(img.height(), box.y + box.height + m);
  cv::Mat out = img.pixels(cv::Rect(x0, y0, x1 - x0, y1 - y0)).clone();
  return derive_image(img, out,
                      "DetectCrop(rect=" + std::to_string(x0) + "," + std::to_string(y0) + "," +
                          std::to_string(x1 - x0) + "x" + std::to_string(y1 - y0) + ")");
}

inline TableImage apply_tool(ToolId id, const TableImage& img, const ToolkitConfig& cfg = {}) {
  switch (id) {
    case ToolId::BorderEnhance: return border_enhance(img, cfg);
    case ToolId::Upscale: return upscale(img, cfg);
    case ToolId::NoiseReduce: return noise_reduce(img, cfg);
    case ToolId::Binarize: return binarize(img, cfg);
    case ToolId::DetectCrop: return detect_and_crop(img, cfg);
  }
  throw ImageError("unknown tool id");
}

}  // namespace ngtr
